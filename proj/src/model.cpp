#include "mvsde/model.hpp"

#include <algorithm>
#include <cmath>

#include "mvsde/exact_sum.hpp"

namespace mvsde {

Ensemble::Ensemble(int dim, std::vector<double> positions, double time)
    : dim_(dim), time_(time), positions_(std::move(positions)) {
  if (dim_ < 1) throw ConfigError("Ensemble: dim must be >= 1");
  if (positions_.empty() || positions_.size() % static_cast<std::size_t>(dim_) != 0)
    throw ConfigError("Ensemble: positions size must be a nonzero multiple of dim");
  count_ = static_cast<int>(positions_.size() / static_cast<std::size_t>(dim_));
}

const std::vector<double>& Ensemble::mean() const {
  if (!mean_valid_) {
    mean_.assign(dim_, 0.0);
    for (int c = 0; c < dim_; ++c) {
      ExactSum acc;
      for (int i = 0; i < count_; ++i) acc.add(positions_[static_cast<std::size_t>(i) * dim_ + c]);
      mean_[c] = acc.value() / count_;
    }
    mean_valid_ = true;
  }
  return mean_;
}

bool Ensemble::finite() const {
  for (double v : positions_)
    if (!std::isfinite(v) || std::fabs(v) > kBlowupThreshold) return false;
  return true;
}

void interaction_conv(std::span<const double> x, const Ensemble& ens,
                      const ModelSpec& model, std::span<double> out) {
  const int d = model.dim;
  for (double v : x)
    if (!std::isfinite(v)) throw InvalidStateError("interaction_conv: non-finite query point");
  if (!model.has_interaction()) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  if (model.b0_linear_coeff) {
    // b0(z) = -K z  =>  (b0 * mu)(x) = -K (x - mean)
    const double k = *model.b0_linear_coeff;
    const auto& m = ens.mean();
    for (int c = 0; c < d; ++c) out[c] = -k * (x[c] - m[c]);
    return;
  }
  std::vector<ExactSum> acc(d);
  std::vector<double> z(d), bz(d);
  for (int j = 0; j < ens.count(); ++j) {
    const double* xj = ens.particle(j);
    for (int c = 0; c < d; ++c) z[c] = x[c] - xj[c];
    model.b0(z.data(), bz.data());
    for (int c = 0; c < d; ++c) acc[c].add(bz[c]);
  }
  for (int c = 0; c < d; ++c) out[c] = acc[c].value() / ens.count();
}

void drift(std::span<const double> x, const Ensemble& ens, const ModelSpec& model,
           std::span<double> out) {
  const int d = model.dim;
  std::vector<double> conv(d);
  interaction_conv(x, ens, model, conv);
  model.b1(x.data(), out.data());
  for (int c = 0; c < d; ++c) out[c] += conv[c];
}

void drift_buffered(const double* x, const Ensemble& ens, const ModelSpec& model,
                    double* out) {
  const int d = model.dim;
  model.b1(x, out);
  if (!model.has_interaction()) return;
  if (model.b0_linear_coeff) {
    const double k = *model.b0_linear_coeff;
    const double* m = ens.mean().data();
    for (int c = 0; c < d; ++c) out[c] -= k * (x[c] - m[c]);
    return;
  }
  ExactSum acc[kMaxModelDim];
  double z[kMaxModelDim], bz[kMaxModelDim];
  for (int j = 0; j < ens.count(); ++j) {
    const double* xj = ens.particle(j);
    for (int c = 0; c < d; ++c) z[c] = x[c] - xj[c];
    model.b0(z, bz);
    for (int c = 0; c < d; ++c) acc[c].add(bz[c]);
  }
  for (int c = 0; c < d; ++c) out[c] += acc[c].value() / ens.count();
}

DissipativityReport check_dissipativity(const ModelSpec& model, int n_pairs,
                                        double radius, std::uint64_t seed) {
  if (n_pairs < 1) throw ConfigError("check_dissipativity: n_pairs must be >= 1");
  const int d = model.dim;
  const ModelConstants& c = model.constants;
  NoiseStream u{seed, 0xD155, 0, MotionTag::W, 1, 1.0};

  DissipativityReport rep;
  rep.pairs = n_pairs;
  rep.max_b1_violation = -1e300;
  rep.max_b0_violation = -1e300;

  std::vector<double> x(d), y(d), bx(d), by(d), b0x(d), b0y(d);
  std::uint64_t k = 0;
  for (int p = 0; p < n_pairs; ++p) {
    // center anywhere in [-radius, radius]^d, offset of norm <= radius
    double nrm2 = 0.0;
    for (int cdx = 0; cdx < d; ++cdx) {
      x[cdx] = radius * std::tanh(u.normal(k++));
      y[cdx] = u.normal(k++);
      nrm2 += y[cdx] * y[cdx];
    }
    const double want = radius * 0.5 * (1.0 + std::tanh(u.normal(k++)));
    const double scale = (nrm2 > 0) ? want / std::sqrt(nrm2) : 0.0;
    double r2 = 0.0;
    for (int cdx = 0; cdx < d; ++cdx) {
      y[cdx] = x[cdx] + scale * y[cdx];
      const double dd = x[cdx] - y[cdx];
      r2 += dd * dd;
    }
    const double r = std::sqrt(r2);

    model.b1(x.data(), bx.data());
    model.b1(y.data(), by.data());
    double inner = 0.0;
    for (int cdx = 0; cdx < d; ++cdx) inner += (x[cdx] - y[cdx]) * (bx[cdx] - by[cdx]);
    const double bound = (r <= c.ell0) ? r * (c.lambda0 * r) : -c.lambda * r2;
    const double viol = inner - bound;
    if (viol > rep.max_b1_violation) {
      rep.max_b1_violation = viol;
      rep.worst_x = x;
      rep.worst_y = y;
      rep.worst_r = r;
    }

    if (model.has_interaction()) {
      if (model.b0_linear_coeff) {
        std::vector<double> zx(d), zy(d);
        for (int cdx = 0; cdx < d; ++cdx) {
          zx[cdx] = -*model.b0_linear_coeff * x[cdx];
          zy[cdx] = -*model.b0_linear_coeff * y[cdx];
        }
        b0x = zx;
        b0y = zy;
      } else {
        model.b0(x.data(), b0x.data());
        model.b0(y.data(), b0y.data());
      }
      double diff2 = 0.0;
      for (int cdx = 0; cdx < d; ++cdx) {
        const double dd = b0x[cdx] - b0y[cdx];
        diff2 += dd * dd;
      }
      rep.max_b0_violation = std::max(rep.max_b0_violation, std::sqrt(diff2) - c.K * r);
    }
  }
  if (!model.has_interaction()) rep.max_b0_violation = 0.0;
  const double tol = 1e-9;
  rep.pass = rep.max_b1_violation <= tol && rep.max_b0_violation <= tol;
  return rep;
}

namespace {

ModelSpec double_well_1d(const GalleryParams& p) {
  ModelSpec m;
  m.name = "double-well-1d";
  m.dim = 1;
  m.b1 = [](const double* x, double* out) { out[0] = x[0] - x[0] * x[0] * x[0]; };
  m.grad_b1 = [](const double* x, double* out) { out[0] = 1.0 - 3.0 * x[0] * x[0]; };
  m.b0_linear_coeff = p.K_interaction;
  m.sigma = p.sigma;
  // b1(x) = x - x^3 satisfies the split dissipativity bound with
  // lambda0 = 1, lambda = 1 once ell0 = 2*sqrt(2): the pair identity
  // <x-y, b1(x)-b1(y)> = r^2 (1 - (x^2+xy+y^2)) and x^2+xy+y^2 >= r^2/4.
  m.constants.lambda0 = 1.0;
  m.constants.lambda = 1.0;
  m.constants.ell0 = 2.0 * std::sqrt(2.0);
  m.constants.K = p.K_interaction;
  m.constants.L = p.L_mult;
  m.constants.alpha = 10.0;
  m.constants.lambda_b1 = 0.25;
  m.constants.lambda_b1_hat = 1.0 / 3.0;
  m.constants.lstar = 2.0;
  return m;
}

ModelSpec ou_model(const GalleryParams& p) {
  ModelSpec m;
  m.name = "ou";
  m.dim = p.dim;
  const double beta = p.beta, a = p.alpha;
  const int d = p.dim;
  m.b1 = [beta, a, d](const double* x, double* out) {
    for (int c = 0; c < d; ++c) out[c] = beta * (a - x[c]);
  };
  m.grad_b1 = [beta, d](const double*, double* out) {
    std::fill(out, out + d * d, 0.0);
    for (int c = 0; c < d; ++c) out[c * d + c] = -beta;
  };
  m.b0_linear_coeff = p.K_interaction;
  m.sigma = p.sigma;
  // Linear drift satisfies the split bound for any nonnegative (lambda0,
  // ell0); small positive values keep the Lyapunov constants nondegenerate.
  m.constants.lambda0 = 0.05;
  m.constants.lambda = beta;
  m.constants.ell0 = 0.5;
  m.constants.K = p.K_interaction;
  m.constants.L = p.L_mult;
  m.constants.alpha = beta;
  m.constants.lambda_b1 = 0.5 / std::sqrt(static_cast<double>(d));
  m.constants.lambda_b1_hat = 2.0 / std::sqrt(static_cast<double>(d));
  m.constants.lstar = 0.0;
  return m;
}

ModelSpec double_well_nd(const GalleryParams& p) {
  ModelSpec m;
  m.name = "double-well-nd";
  m.dim = p.dim;
  const int d = p.dim;
  m.b1 = [d](const double* x, double* out) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) s += x[c] * x[c];
    for (int c = 0; c < d; ++c) out[c] = x[c] - s * x[c];
  };
  m.grad_b1 = [d](const double* x, double* out) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) s += x[c] * x[c];
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        out[i * d + j] = ((i == j) ? (1.0 - s) : 0.0) - 2.0 * x[i] * x[j];
  };
  m.b0_linear_coeff = p.K_interaction;
  m.sigma = p.sigma;
  // Same dissipativity constants as the scalar double well: the cubic
  // monotonicity bound <x-y, |x|^2 x - |y|^2 y> >= r^4/4 is dimension-free.
  m.constants.lambda0 = 1.0;
  m.constants.lambda = 1.0;
  m.constants.ell0 = 2.0 * std::sqrt(2.0);
  m.constants.K = p.K_interaction;
  m.constants.L = p.L_mult;
  m.constants.alpha = 10.0;
  m.constants.lambda_b1 = 0.25 / std::sqrt(static_cast<double>(d));
  m.constants.lambda_b1_hat = 0.4 / std::sqrt(static_cast<double>(d));
  m.constants.lstar = 2.0;
  return m;
}

void attach_sigma0(ModelSpec& m, double L_mult) {
  if (L_mult <= 0.0) return;
  const int d = m.dim;
  const double s = std::sqrt(L_mult);
  m.sigma0_cols = d;
  m.sigma0 = [d, s](const double* x, double* out) {
    std::fill(out, out + d * d, 0.0);
    for (int c = 0; c < d; ++c) out[c * d + c] = s * std::sin(x[c]);
  };
  m.constants.L = L_mult;
}

}  // namespace

ModelSpec make_gallery_model(const std::string& name, const GalleryParams& params) {
  GalleryParams p = params;
  if (p.dim < 1) throw ConfigError("model: dim must be >= 1");
  ModelSpec m;
  if (name == "double-well-1d") {
    m = double_well_1d(p);
  } else if (name == "ou") {
    m = ou_model(p);
  } else if (name == "double-well-nd") {
    m = double_well_nd(p);
  } else {
    throw ConfigError("model: unknown gallery name '" + name + "'");
  }
  attach_sigma0(m, p.L_mult);
  return m;
}

}  // namespace mvsde
