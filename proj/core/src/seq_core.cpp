#include "vdm/seq_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vdm/errors.hpp"

namespace vdm {

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    for (double& v : m.data()) v = rng.uniform(-bound, bound);
    return m;
}

} // namespace

AttentionSpec make_attention_spec(std::int32_t d_model, std::int32_t d_k,
                                  std::int32_t d_v, Rng& rng) {
    AttentionSpec spec;
    spec.d_model = d_model;
    spec.d_k = d_k;
    spec.d_v = d_v;
    spec.w_q = random_matrix(static_cast<std::size_t>(d_model),
                             static_cast<std::size_t>(d_k), rng);
    spec.w_k = random_matrix(static_cast<std::size_t>(d_model),
                             static_cast<std::size_t>(d_k), rng);
    spec.w_v = random_matrix(static_cast<std::size_t>(d_model),
                             static_cast<std::size_t>(d_v), rng);
    spec.w_o = random_matrix(static_cast<std::size_t>(d_v),
                             static_cast<std::size_t>(d_model), rng);
    return spec;
}

void validate_attention_spec(const AttentionSpec& spec) {
    if (spec.d_model < 1 || spec.d_k < 1 || spec.d_v < 1)
        throw ConfigError("attention: dimensions must be positive");
    auto check = [](const Matrix& m, std::int32_t r, std::int32_t c, const char* name) {
        if (m.rows() != static_cast<std::size_t>(r) ||
            m.cols() != static_cast<std::size_t>(c))
            throw DimensionError(std::string("attention: bad shape for ") + name);
    };
    check(spec.w_q, spec.d_model, spec.d_k, "W_Q");
    check(spec.w_k, spec.d_model, spec.d_k, "W_K");
    check(spec.w_v, spec.d_model, spec.d_v, "W_V");
    check(spec.w_o, spec.d_v, spec.d_model, "W_O");
}

Matrix attention_weights(const Matrix& x, const AttentionSpec& spec) {
    validate_attention_spec(spec);
    if (x.cols() != static_cast<std::size_t>(spec.d_model))
        throw DimensionError("attention: input width != d_model");
    const std::size_t len = x.rows();

    const Matrix q = matmul(x, spec.w_q);
    const Matrix k = matmul(x, spec.w_k);
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(spec.d_k));

    Matrix weights(len, len);
    for (std::size_t i = 0; i < len; ++i) {
        auto row = weights.row(i);
        for (std::size_t j = 0; j < len; ++j) {
            double dot = 0.0;
            for (std::size_t d = 0; d < q.cols(); ++d)
                dot += q.at(i, d) * k.at(j, d);
            row[j] = dot * inv_scale;
        }
        // Stabilized softmax: subtract the row max before exponentiating.
        const double m = *std::max_element(row.begin(), row.end());
        double denom = 0.0;
        for (double& v : row) {
            v = std::exp(v - m);
            denom += v;
        }
        const double inv = 1.0 / denom;
        for (double& v : row) v *= inv;
    }
    return weights;
}

Matrix attention(const Matrix& x, const AttentionSpec& spec) {
    const Matrix weights = attention_weights(x, spec);
    const Matrix v = matmul(x, spec.w_v);
    return matmul(matmul(weights, v), spec.w_o);
}

SsmSpec make_ssm_spec(std::int32_t state_dim, double delta, Rng& rng) {
    SsmSpec spec;
    spec.state_dim = state_dim;
    spec.delta = delta;
    spec.a_diag.resize(static_cast<std::size_t>(state_dim));
    spec.b.resize(static_cast<std::size_t>(state_dim));
    spec.c.resize(static_cast<std::size_t>(state_dim));
    for (double& a : spec.a_diag) a = -rng.uniform(0.1, 1.0);
    for (double& b : spec.b) b = rng.uniform(-1.0, 1.0);
    for (double& c : spec.c) c = rng.uniform(-1.0, 1.0);
    return spec;
}

void validate_ssm_spec(const SsmSpec& spec) {
    if (spec.state_dim < 1) throw ConfigError("ssm: state_dim must be positive");
    const auto n = static_cast<std::size_t>(spec.state_dim);
    if (spec.a_diag.size() != n || spec.b.size() != n || spec.c.size() != n)
        throw DimensionError("ssm: parameter vectors must have state_dim entries");
    for (double a : spec.a_diag)
        if (!(a < 0.0)) throw ConfigError("ssm: diagonal of A must be strictly negative");
    if (!(spec.delta > 0.0)) throw ConfigError("ssm: delta must be positive");
}

DiscreteSsm discretize(const SsmSpec& spec) {
    validate_ssm_spec(spec);
    DiscreteSsm d;
    const auto n = static_cast<std::size_t>(spec.state_dim);
    d.a.resize(n);
    d.b.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = spec.a_diag[i];
        const double ea = std::exp(spec.delta * a);
        d.a[i] = ea;
        // (e^{delta a} - 1)/a loses all precision as a -> 0; switch to the
        // exact limit delta below 1e-8.
        d.b[i] = (std::abs(a) < 1e-8) ? spec.delta * spec.b[i]
                                      : (ea - 1.0) / a * spec.b[i];
    }
    return d;
}

std::vector<double> ssm_scan_discrete(const std::vector<double>& x,
                                      const DiscreteSsm& d,
                                      const std::vector<double>& c) {
    const std::size_t n = d.a.size();
    if (d.b.size() != n || c.size() != n)
        throw DimensionError("ssm_scan: discrete parameter sizes differ");
    std::vector<double> h(n, 0.0);
    std::vector<double> y(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        double out = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            h[i] = d.a[i] * h[i] + d.b[i] * x[t];
            out += c[i] * h[i];
        }
        y[t] = out;
    }
    return y;
}

std::vector<double> ssm_scan(const std::vector<double>& x, const SsmSpec& spec) {
    return ssm_scan_discrete(x, discretize(spec), spec.c);
}

Matrix ssm_channelwise(const Matrix& x, const std::vector<SsmSpec>& specs) {
    if (specs.size() != x.cols())
        throw DimensionError("ssm_channelwise: " + std::to_string(specs.size()) +
                             " specs for " + std::to_string(x.cols()) + " columns");
    Matrix y(x.rows(), x.cols());
    std::vector<double> col(x.rows());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        for (std::size_t i = 0; i < x.rows(); ++i) col[i] = x.at(i, j);
        const std::vector<double> out = ssm_scan(col, specs[j]);
        for (std::size_t i = 0; i < x.rows(); ++i) y.at(i, j) = out[i];
    }
    return y;
}

} // namespace vdm
