#include "ipv/lpa.hpp"

#include <stdexcept>

namespace ipv {

DistanceMatrix hybrid_distance(const Matrix& memberships_panel, const Matrix& robust_panel, double alpha,
                               int physician_id, bool* degenerate) {
  if (memberships_panel.rows() != robust_panel.rows())
    throw std::invalid_argument("hybrid_distance: membership and covariate rows differ");
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("hybrid_distance: alpha must lie in [0, 1]");
  const DistanceMatrix latent = pairwise_euclidean(memberships_panel);
  const DistanceMatrix clinical = pairwise_euclidean(robust_panel);
  const double max_lat = latent.values.size() ? latent.values.maxCoeff() : 0.0;
  const double max_cli = clinical.values.size() ? clinical.values.maxCoeff() : 0.0;
  if (degenerate) *degenerate = !(max_lat > 0.0) || !(max_cli > 0.0);

  DistanceMatrix d;
  d.physician_id = physician_id;
  d.values.setZero(latent.values.rows(), latent.values.cols());
  if (max_lat > 0.0) d.values += (alpha / max_lat) * latent.values;
  if (max_cli > 0.0) d.values += ((1.0 - alpha) / max_cli) * clinical.values;
  return d;
}

}  // namespace ipv
