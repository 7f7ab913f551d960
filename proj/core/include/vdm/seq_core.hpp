#pragma once

#include <cstdint>
#include <vector>

#include "vdm/matrix.hpp"
#include "vdm/rng.hpp"

namespace vdm {

/// Single-head scaled dot-product attention parameters.
struct AttentionSpec {
    std::int32_t d_model = 0;
    std::int32_t d_k = 0;
    std::int32_t d_v = 0;
    Matrix w_q; // d_model x d_k
    Matrix w_k; // d_model x d_k
    Matrix w_v; // d_model x d_v
    Matrix w_o; // d_v x d_model
};

/// Random attention spec, weights uniform in +-1/sqrt(rows).
AttentionSpec make_attention_spec(std::int32_t d_model, std::int32_t d_k,
                                  std::int32_t d_v, Rng& rng);

void validate_attention_spec(const AttentionSpec& spec);

/// softmax(X W_q (X W_k)^T / sqrt(d_k)) X W_v W_o for an L x d_model sequence.
/// The softmax is max-subtraction stabilized; each weight row sums to 1.
Matrix attention(const Matrix& x, const AttentionSpec& spec);

/// The L x L row-stochastic attention weight matrix for the same inputs,
/// exposed for inspection and tests.
Matrix attention_weights(const Matrix& x, const AttentionSpec& spec);

// Diagonal continuous-time state space model
//   h'(t) = A h(t) + B x(t),  y(t) = C h(t)
// with a strictly negative diagonal A (stored as a_diag) and step delta > 0.
struct SsmSpec {
    std::int32_t state_dim = 0;
    std::vector<double> a_diag; // each entry < 0
    std::vector<double> b;      // state_dim
    std::vector<double> c;      // state_dim
    double delta = 0.0;
};

/// Random stable spec: a in [-1, -0.1), b and c in [-1, 1).
SsmSpec make_ssm_spec(std::int32_t state_dim, double delta, Rng& rng);

void validate_ssm_spec(const SsmSpec& spec);

/// Zero-order-hold discretization per diagonal entry:
///   A'_i = exp(delta * a_i),  B'_i = (exp(delta * a_i) - 1) / a_i * B_i,
/// with the |a_i| < 1e-8 limit B'_i = delta * B_i.
struct DiscreteSsm {
    std::vector<double> a; // A'
    std::vector<double> b; // B'
};
DiscreteSsm discretize(const SsmSpec& spec);

/// Recurrence h_t = A' h_{t-1} + B' x_t, y_t = C h_t with h_0 = 0, on already
/// discretized parameters.
std::vector<double> ssm_scan_discrete(const std::vector<double>& x,
                                      const DiscreteSsm& d,
                                      const std::vector<double>& c);

/// discretize(spec) + ssm_scan_discrete.
std::vector<double> ssm_scan(const std::vector<double>& x, const SsmSpec& spec);

/// Applies ssm_scan independently per column: column j of the result is
/// ssm_scan(X[:, j], specs[j]). Throws DimensionError if specs.size() != cols.
Matrix ssm_channelwise(const Matrix& x, const std::vector<SsmSpec>& specs);

} // namespace vdm
