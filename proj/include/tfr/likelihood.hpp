#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tfr/core.hpp"
#include "tfr/numerics.hpp"

namespace tfr {

// Forward fits (beta, gamma, sigma_m, v_star, alpha); Inverse fits
// (beta, gamma, sigma_w); DualScatter fits all six.
enum class ModelKind { Forward, Inverse, DualScatter };

std::string to_string(ModelKind kind);
std::optional<ModelKind> model_kind_from_string(const std::string& name);
std::vector<std::string> param_names(ModelKind kind);
int param_count(ModelKind kind);
ModelParams unpack_params(ModelKind kind, std::span<const double> theta);
std::vector<double> pack_params(ModelKind kind, const ModelParams& p);

struct ForwardPdfOptions {
  // Test hook: replace the inclination prior by a point mass at this value.
  std::optional<double> pinned_inclination;
};

// Conditional pdf of the apparent mass given projected width and distance,
// marginalized over inclination (forward model, step or no selection).
double conditional_pdf_forward(double m_tilde, double w, double d, const ModelParams& params,
                               const SelectionSpec& selection,
                               const ForwardPdfOptions& options = {});

// Conditional pdf of the projected width given mass and distance (inverse
// model; selection depends only on m and drops out).
double conditional_pdf_inverse(double w_tilde, double m, double d, const ModelParams& params);

// Conditional pdf of the apparent mass given the *measured* width and
// distance (dual-scatter model), evaluated on the FFT convolution grids.
double conditional_pdf_dual(double m_tilde, double w_tilde, double d, const ModelParams& params,
                            const SelectionSpec& selection, int n_nodes = 1024);

class DualEvaluator;

struct LikelihoodContext {
  std::vector<GalaxyRecord> catalog;
  SelectionSpec selection;
  ModelKind kind = ModelKind::Forward;
  GridSpec grids;     // used by the dual-scatter path
  int threads = 0;    // 0 = library default

  static LikelihoodContext build(std::vector<GalaxyRecord> catalog, SelectionSpec selection,
                                 ModelKind kind, int grid_nodes = 1024, int threads = 0);

  bool has_per_source_errors = false;
  std::vector<double> distinct_d;  // unique distances, ascending

  std::shared_ptr<DualEvaluator> dual;  // lazily prepared per parameter vector
};

struct LogLikeResult {
  double value = 0.0;
  int clamped = 0;  // records whose density fell below 1e-300
};

// Sum of per-record log conditional pdfs.  Record terms are accumulated in a
// canonical (sorted, compensated) order, so the value is bit-stable under
// record permutation and independent of the thread count.  Densities below
// 1e-300 contribute a -690 barrier instead of -inf.
LogLikeResult log_likelihood_detailed(const LikelihoodContext& ctx, const ModelParams& params);
double log_likelihood(const LikelihoodContext& ctx, const ModelParams& params);

namespace detail {

// Selection-normalization integral of the forward model (the denominator of
// the conditional pdf), exposed for monotonicity tests.
double forward_denominator(double w, double d, const ModelParams& params,
                           const SelectionSpec& selection);

// Same-grid direct O(n_i * n_v) evaluation of the dual-scatter log pdf; the
// baseline the FFT path is benchmarked and verified against.
double dual_log_pdf_direct(double m_tilde, double w_tilde, double d, const ModelParams& params,
                           const SelectionSpec& selection, const GridSpec& grids);

double dual_log_pdf_fft(double m_tilde, double w_tilde, double d, const ModelParams& params,
                        const SelectionSpec& selection, const GridSpec& grids);

} // namespace detail

} // namespace tfr
