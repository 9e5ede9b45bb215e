// SPDX-License-Identifier: Apache-2.0

#include "dpse/fastmnmf.h"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <random>
#include <sstream>

#include "dpse/error.h"
#include "dpse/kernels.h"

namespace dpse {
namespace {

constexpr double kParamFloor = 1e-10;
constexpr double kRelativeFloor = 1e-10;

void ValidateDims(const MnmfDims& d) {
  if (d.sources < 1 || d.channels < 1 || d.bins < 1 || d.components < 1)
    throw Error(ErrorCode::kInvalidArgument, "FastMNMF dimensions must be positive");
}

// log |det A|^2 for an n x n matrix via LU.
double LogAbsDet2(const cplx* a_in, int n) {
  std::vector<cplx> a(a_in, a_in + size_t(n) * n);
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(a[i * n + k]) > std::abs(a[p * n + k])) p = i;
    if (p != k)
      for (int j = 0; j < n; ++j) std::swap(a[k * n + j], a[p * n + j]);
    const cplx piv = a[k * n + k];
    if (piv == cplx(0.0)) return -std::numeric_limits<double>::infinity();
    acc += std::log(std::norm(piv));
    for (int i = k + 1; i < n; ++i) {
      const cplx factor = a[i * n + k] / piv;
      for (int j = k + 1; j < n; ++j) a[i * n + j] -= factor * a[k * n + j];
    }
  }
  return acc;
}

bool InvertInto(const cplx* a, int n, cplx* out) {
  std::vector<cplx> lu(a, a + size_t(n) * n);
  std::vector<cplx> id(size_t(n) * n, 0.0);
  for (int i = 0; i < n; ++i) id[i * n + i] = 1.0;
  std::vector<int> piv(n);
  if (!SolveInPlace(lu, n, id, n, 0.0, piv)) return false;
  std::copy(id.begin(), id.end(), out);
  return true;
}

// Working arrays for one call to Fit. Layouts are [F][M][T] or [N][F][T] so
// the t axis is contiguous for the SIMD kernels.
class Sweeper {
 public:
  Sweeper(FastMnmfModel& model, const SpectrogramBlock& block)
      : m_(model),
        k_(kernels::Active()),
        n_(model.dims.sources),
        ch_(model.dims.channels),
        f_(model.dims.bins),
        c_(model.dims.components),
        t_(model.frames),
        x_(size_t(f_) * ch_ * t_),
        y_(size_t(f_) * ch_ * t_),
        p_(size_t(f_) * ch_ * t_),
        lam_(size_t(n_) * f_ * t_),
        yhat_(size_t(f_) * ch_ * t_),
        inv_(size_t(ch_) * t_),
        ratio_(size_t(ch_) * t_),
        a_(size_t(n_) * t_),
        b_(size_t(n_) * t_),
        weights_(t_) {
    double power = 0.0;
    for (int f = 0; f < f_; ++f)
      for (int t = 0; t < t_; ++t)
        for (int m = 0; m < ch_; ++m) {
          const cplx v = block.at(f, t, m);
          x_[Idx(f, m, t)] = v;
          power += std::norm(v);
        }
    power /= double(size_t(f_) * t_ * ch_);
    floor_ = kRelativeFloor * std::max(power, DBL_MIN);
    for (int f = 0; f < f_; ++f) ComputeY(f);
    for (int f = 0; f < f_; ++f) {
      for (int n = 0; n < n_; ++n) ComputeLambda(n, f);
      ComputeModel(f);
    }
  }

  double LogLikelihood() const {
    double ll = 0.0;
    for (int f = 0; f < f_; ++f) {
      double acc = 0.0;
      for (int m = 0; m < ch_; ++m) {
        const double* p = &p_[Idx(f, m, 0)];
        const double* yh = &yhat_[Idx(f, m, 0)];
        for (int t = 0; t < t_; ++t) acc += p[t] / yh[t] + std::log(yh[t]);
      }
      ll += -acc + t_ * LogAbsDet2(&m_.q[size_t(f) * ch_ * ch_], ch_);
    }
    return ll;
  }

  double MeanQNorm() const {
    double s = 0.0;
    for (const cplx& v : m_.q) s += std::norm(v);
    return std::sqrt(s / f_);
  }

  bool Finite() const {
    double s = 0.0;
    for (double v : yhat_) s += v;
    for (double v : m_.u) s += v;
    for (const cplx& v : m_.q) s += std::abs(v);
    return std::isfinite(s);
  }

  void UpdateU() {
    for (int f = 0; f < f_; ++f) {
      Ratios(f);
      for (int n = 0; n < n_; ++n) {
        Aux(n, f);
        for (int c = 0; c < c_; ++c) {
          const double* v = &m_.v[(size_t(n) * c_ + c) * t_];
          const double num = k_.ddot(v, &a_[size_t(n) * t_], t_);
          const double den = k_.ddot(v, &b_[size_t(n) * t_], t_);
          double& u = m_.U(n, c, f);
          u = std::max(u * std::sqrt(num / den), kParamFloor);
        }
        ComputeLambda(n, f);
      }
      ComputeModel(f);
    }
  }

  void UpdateV() {
    std::vector<double> num(size_t(n_) * c_ * t_, 0.0), den(size_t(n_) * c_ * t_, 0.0);
    for (int f = 0; f < f_; ++f) {
      Ratios(f);
      for (int n = 0; n < n_; ++n) {
        Aux(n, f);
        for (int c = 0; c < c_; ++c) {
          const double u = m_.U(n, c, f);
          k_.daxpy(u, &a_[size_t(n) * t_], &num[(size_t(n) * c_ + c) * t_], t_);
          k_.daxpy(u, &b_[size_t(n) * t_], &den[(size_t(n) * c_ + c) * t_], t_);
        }
      }
    }
    for (size_t i = 0; i < m_.v.size(); ++i)
      m_.v[i] = std::max(m_.v[i] * std::sqrt(num[i] / den[i]), floor_);
    for (int f = 0; f < f_; ++f) {
      for (int n = 0; n < n_; ++n) ComputeLambda(n, f);
      ComputeModel(f);
    }
  }

  void UpdateG() {
    if (m_.per_frequency_gains) {
      for (int f = 0; f < f_; ++f) {
        Ratios(f);
        for (int n = 0; n < n_; ++n) {
          const double* lam = &lam_[Lidx(n, f, 0)];
          for (int m = 0; m < ch_; ++m) {
            const double num = k_.ddot(lam, &ratio_[size_t(m) * t_], t_);
            const double den = k_.ddot(lam, &inv_[size_t(m) * t_], t_);
            double& g = m_.G(n, f, m);
            g = std::max(g * std::sqrt(num / den), kParamFloor);
          }
        }
        ComputeModel(f);
      }
      return;
    }
    std::vector<double> num(size_t(n_) * ch_, 0.0), den(size_t(n_) * ch_, 0.0);
    for (int f = 0; f < f_; ++f) {
      Ratios(f);
      for (int n = 0; n < n_; ++n) {
        const double* lam = &lam_[Lidx(n, f, 0)];
        for (int m = 0; m < ch_; ++m) {
          num[n * ch_ + m] += k_.ddot(lam, &ratio_[size_t(m) * t_], t_);
          den[n * ch_ + m] += k_.ddot(lam, &inv_[size_t(m) * t_], t_);
        }
      }
    }
    for (int n = 0; n < n_; ++n)
      for (int m = 0; m < ch_; ++m) {
        const double g =
            std::max(m_.G(n, 0, m) * std::sqrt(num[n * ch_ + m] / den[n * ch_ + m]), kParamFloor);
        for (int f = 0; f < f_; ++f) m_.G(n, f, m) = g;
      }
    for (int f = 0; f < f_; ++f) ComputeModel(f);
  }

  void UpdateQ() {
    const int mm = ch_;
    std::vector<cplx> cov(size_t(mm) * mm), lhs(size_t(mm) * mm), rhs(mm);
    std::vector<int> piv(mm);
    for (int f = 0; f < f_; ++f) {
      cplx* q = &m_.q[size_t(f) * mm * mm];
      for (int m = 0; m < mm; ++m) {
        const double* yh = &yhat_[Idx(f, m, 0)];
        for (int t = 0; t < t_; ++t) weights_[t] = 1.0 / (t_ * yh[t]);
        // cov_ij = (1/T) sum_t x_i conj(x_j) / yhat_mt
        for (int i = 0; i < mm; ++i) {
          for (int j = i; j < mm; ++j) {
            const cplx v = k_.wcdotc(&x_[Idx(f, j, 0)], &x_[Idx(f, i, 0)], weights_.data(), t_);
            cov[i * mm + j] = v;
            cov[j * mm + i] = std::conj(v);
          }
          cov[i * mm + i] = cov[i * mm + i].real();
        }
        for (int i = 0; i < mm; ++i)
          for (int j = 0; j < mm; ++j) {
            cplx acc = 0.0;
            for (int l = 0; l < mm; ++l) acc += q[i * mm + l] * cov[l * mm + j];
            lhs[i * mm + j] = acc;
          }
        std::fill(rhs.begin(), rhs.end(), cplx(0.0));
        rhs[m] = 1.0;
        if (!SolveInPlace(lhs, mm, rhs, 1, 0.0, piv)) continue;
        cplx quad = 0.0;
        for (int i = 0; i < mm; ++i)
          for (int j = 0; j < mm; ++j) quad += std::conj(rhs[i]) * cov[i * mm + j] * rhs[j];
        const double scale = quad.real() > 0.0 ? 1.0 / std::sqrt(quad.real()) : 0.0;
        if (!(scale > 0.0) || !std::isfinite(scale)) continue;
        for (int i = 0; i < mm; ++i) q[m * mm + i] = std::conj(rhs[i] * scale);
      }
      ComputeY(f);
    }
  }

  // Removes the scale ambiguities: sum_m g_nfm = M (absorbed by u) and
  // sum_f u_ncf = 1 (absorbed by v). yhat is unchanged.
  void Normalize() {
    for (int n = 0; n < n_; ++n) {
      for (int f = 0; f < f_; ++f) {
        double s = 0.0;
        for (int m = 0; m < ch_; ++m) s += m_.G(n, f, m);
        s /= ch_;
        for (int m = 0; m < ch_; ++m) m_.G(n, f, m) /= s;
        for (int c = 0; c < c_; ++c) m_.U(n, c, f) *= s;
        double* lam = &lam_[Lidx(n, f, 0)];
        for (int t = 0; t < t_; ++t) lam[t] *= s;
      }
      for (int c = 0; c < c_; ++c) {
        double mu = 0.0;
        for (int f = 0; f < f_; ++f) mu += m_.U(n, c, f);
        for (int f = 0; f < f_; ++f) m_.U(n, c, f) /= mu;
        double* v = &m_.v[(size_t(n) * c_ + c) * t_];
        for (int t = 0; t < t_; ++t) v[t] *= mu;
      }
    }
  }

 private:
  size_t Idx(int f, int m, int t) const { return (size_t(f) * ch_ + m) * t_ + t; }
  size_t Lidx(int n, int f, int t) const { return (size_t(n) * f_ + f) * t_ + t; }

  void ComputeY(int f) {
    const cplx* q = &m_.q[size_t(f) * ch_ * ch_];
    for (int m = 0; m < ch_; ++m) {
      cplx* y = &y_[Idx(f, m, 0)];
      std::fill(y, y + t_, cplx(0.0));
      for (int k = 0; k < ch_; ++k) k_.caxpy(q[m * ch_ + k], &x_[Idx(f, k, 0)], y, t_);
      k_.cabs2(y, &p_[Idx(f, m, 0)], t_);
    }
  }

  void ComputeLambda(int n, int f) {
    double* lam = &lam_[Lidx(n, f, 0)];
    std::fill(lam, lam + t_, 0.0);
    for (int c = 0; c < c_; ++c)
      k_.daxpy(m_.U(n, c, f), &m_.v[(size_t(n) * c_ + c) * t_], lam, t_);
  }

  void ComputeModel(int f) {
    for (int m = 0; m < ch_; ++m) {
      double* yh = &yhat_[Idx(f, m, 0)];
      std::fill(yh, yh + t_, 0.0);
      for (int n = 0; n < n_; ++n) k_.daxpy(m_.G(n, f, m), &lam_[Lidx(n, f, 0)], yh, t_);
      for (int t = 0; t < t_; ++t) yh[t] = std::max(yh[t], floor_);
    }
  }

  void Ratios(int f) {
    for (int m = 0; m < ch_; ++m)
      k_.recip_ratio(&p_[Idx(f, m, 0)], &yhat_[Idx(f, m, 0)], &inv_[size_t(m) * t_],
                     &ratio_[size_t(m) * t_], t_);
  }

  // a_n = sum_m g_nfm p/yhat^2, b_n = sum_m g_nfm / yhat for the current f.
  void Aux(int n, int f) {
    double* a = &a_[size_t(n) * t_];
    double* b = &b_[size_t(n) * t_];
    std::fill(a, a + t_, 0.0);
    std::fill(b, b + t_, 0.0);
    for (int m = 0; m < ch_; ++m) {
      k_.daxpy(m_.G(n, f, m), &ratio_[size_t(m) * t_], a, t_);
      k_.daxpy(m_.G(n, f, m), &inv_[size_t(m) * t_], b, t_);
    }
  }

  FastMnmfModel& m_;
  const kernels::KernelTable& k_;
  int n_, ch_, f_, c_, t_;
  double floor_ = 0.0;
  std::vector<cplx> x_, y_;
  std::vector<double> p_, lam_, yhat_, inv_, ratio_, a_, b_, weights_;
};

}  // namespace

CMat FastMnmfModel::Q(int f) const {
  const int m = dims.channels;
  return CMat(m, m, std::span<const cplx>(q.data() + size_t(f) * m * m, size_t(m) * m));
}

CMat FastMnmfModel::QInv(int f) const {
  const int m = dims.channels;
  return CMat(m, m, std::span<const cplx>(q_inv.data() + size_t(f) * m * m, size_t(m) * m));
}

double FastMnmfModel::Psd(int n, int f, int t) const {
  double s = 0.0;
  for (int c = 0; c < dims.components; ++c) s += U(n, c, f) * V(n, c, t);
  return s;
}

void FastMnmfModel::AdvanceFrames(int shift) {
  if (shift <= 0) return;
  const int keep = std::max(frames - shift, 0);
  for (int n = 0; n < dims.sources; ++n)
    for (int c = 0; c < dims.components; ++c) {
      double* row = &v[(size_t(n) * dims.components + c) * frames];
      double mean = 0.0;
      for (int t = 0; t < frames; ++t) mean += row[t];
      mean /= frames;
      if (keep > 0) std::copy(row + shift, row + frames, row);
      std::fill(row + keep, row + frames, mean);
    }
}

FastMnmfModel InitModel(const InitOptions& opts) {
  const MnmfDims& d = opts.dims;
  ValidateDims(d);
  if (opts.frames < 1) throw Error(ErrorCode::kInvalidArgument, "model needs >= 1 frame");
  const int directed = int(opts.steering.size());
  if (directed > d.sources || directed > d.channels)
    throw Error(ErrorCode::kInvalidArgument, "more directions than sources or channels");
  for (const auto& s : opts.steering)
    if (s.size() != size_t(d.bins) * d.channels)
      throw Error(ErrorCode::kInvalidArgument, "steering array must be F x M");

  FastMnmfModel model;
  model.dims = d;
  model.frames = opts.frames;
  model.target_source = 0;
  model.per_frequency_gains = false;
  const int mm = d.channels;
  model.q.assign(size_t(d.bins) * mm * mm, 0.0);
  model.q_inv.assign(size_t(d.bins) * mm * mm, 0.0);

  std::vector<std::vector<cplx>> cols;
  for (int f = 0; f < d.bins; ++f) {
    cols.clear();
    for (int i = 0; i < directed; ++i) {
      std::vector<cplx> col(opts.steering[i].begin() + size_t(f) * mm,
                            opts.steering[i].begin() + size_t(f + 1) * mm);
      double norm = 0.0;
      for (const cplx& v : col) norm += std::norm(v);
      norm = std::sqrt(norm);
      if (norm > 0.0)
        for (cplx& v : col) v /= norm;
      cols.push_back(std::move(col));
    }
    // Fill with canonical vectors orthogonalized against what is present.
    for (int e = 0; e < mm && int(cols.size()) < mm; ++e) {
      std::vector<cplx> col(mm, 0.0);
      col[e] = 1.0;
      for (const auto& prev : cols) {
        cplx dot = 0.0;
        for (int i = 0; i < mm; ++i) dot += std::conj(prev[i]) * col[i];
        for (int i = 0; i < mm; ++i) col[i] -= dot * prev[i];
      }
      double norm = 0.0;
      for (const cplx& v : col) norm += std::norm(v);
      norm = std::sqrt(norm);
      if (norm < 1e-6) continue;
      for (cplx& v : col) v /= norm;
      cols.push_back(std::move(col));
    }
    for (int e = 0; int(cols.size()) < mm; ++e) {
      std::vector<cplx> col(mm, 0.0);
      col[e % mm] = 1.0;
      cols.push_back(std::move(col));
    }
    cplx* qi = &model.q_inv[size_t(f) * mm * mm];
    for (int j = 0; j < mm; ++j)
      for (int i = 0; i < mm; ++i) qi[i * mm + j] = cols[j][i];
    cplx* q = &model.q[size_t(f) * mm * mm];
    if (!InvertInto(qi, mm, q)) {
      for (int i = 0; i < mm; ++i) qi[i * mm + i] += 1e-3;
      if (!InvertInto(qi, mm, q))
        throw Error(ErrorCode::kSingularInitialization, "diagonalizer init is singular");
    }
  }

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> uni(0.5, 1.5);
  model.u.resize(size_t(d.sources) * d.bins * d.components);
  for (auto& v : model.u) v = uni(rng);
  model.v.resize(size_t(d.sources) * d.components * opts.frames);
  for (auto& v : model.v) v = uni(rng);
  model.g.resize(size_t(d.sources) * d.bins * mm);
  for (int n = 0; n < d.sources; ++n)
    for (int f = 0; f < d.bins; ++f)
      for (int m = 0; m < mm; ++m) model.G(n, f, m) = (m == n % mm) ? 1.0 : 1e-2;
  return model;
}

FitReport Fit(FastMnmfModel& model, const SpectrogramBlock& block, const FitOptions& opts) {
  const MnmfDims& d = model.dims;
  if (block.bins() != d.bins || block.channels() != d.channels || block.frames() != model.frames)
    throw Error(ErrorCode::kInvalidArgument, "block does not match model dimensions");
  const FitSchedule& sched = opts.schedule;
  if (sched.total_iters < 0 || sched.warmup_iters < 0)
    throw Error(ErrorCode::kInvalidArgument, "negative iteration counts");

  if (model.per_frequency_gains && sched.warmup_iters > 0) {
    for (int n = 0; n < d.sources; ++n)
      for (int m = 0; m < d.channels; ++m) {
        double mean = 0.0;
        for (int f = 0; f < d.bins; ++f) mean += model.G(n, f, m);
        mean /= d.bins;
        for (int f = 0; f < d.bins; ++f) model.G(n, f, m) = mean;
      }
    model.per_frequency_gains = false;
  }

  Sweeper sweeper(model, block);
  FitReport report;
  if (opts.track_likelihood) report.loglik.push_back(sweeper.LogLikelihood());
  for (int s = 0; s < sched.total_iters; ++s) {
    if (s >= sched.warmup_iters) model.per_frequency_gains = true;
    sweeper.UpdateU();
    sweeper.UpdateV();
    sweeper.UpdateG();
    sweeper.UpdateQ();
    sweeper.Normalize();
    if (opts.track_likelihood) {
      const double ll = sweeper.LogLikelihood();
      if (!std::isfinite(ll))
        throw Error(ErrorCode::kLikelihoodDiverged, "log-likelihood is not finite");
      report.loglik.push_back(ll);
      report.q_norms.push_back(sweeper.MeanQNorm());
    }
  }
  if (!sweeper.Finite()) throw Error(ErrorCode::kLikelihoodDiverged, "model parameters diverged");

  const int mm = d.channels;
  for (int f = 0; f < d.bins; ++f) {
    if (!InvertInto(&model.q[size_t(f) * mm * mm], mm, &model.q_inv[size_t(f) * mm * mm]))
      throw Error(ErrorCode::kLikelihoodDiverged, "diagonalizer became singular");
  }
  return report;
}

double LogLikelihood(const FastMnmfModel& model, const SpectrogramBlock& block) {
  FastMnmfModel copy = model;
  return Sweeper(copy, block).LogLikelihood();
}

std::string FitReportJsonLines(const FitReport& report) {
  std::ostringstream os;
  os.precision(17);
  for (size_t i = 0; i < report.loglik.size(); ++i) {
    os << "{\"iter\":" << i << ",\"loglik\":" << report.loglik[i];
    if (i > 0 && i - 1 < report.q_norms.size()) os << ",\"q_norm\":" << report.q_norms[i - 1];
    os << "}\n";
  }
  return os.str();
}

FramePosterior Posterior(const FastMnmfModel& model, int f, int t) {
  const MnmfDims& d = model.dims;
  const int mm = d.channels;
  const CMat q = model.Q(f);
  const CMat qi = model.QInv(f);
  const CMat qi_h = Adjoint(qi);
  std::vector<double> lam(d.sources);
  for (int n = 0; n < d.sources; ++n) lam[n] = model.Psd(n, f, t);
  std::vector<double> total(mm, 0.0);
  for (int n = 0; n < d.sources; ++n)
    for (int m = 0; m < mm; ++m) total[m] += lam[n] * model.G(n, f, m);

  FramePosterior post;
  for (int n = 0; n < d.sources; ++n) {
    CMat wdiag(mm, mm), sdiag(mm, mm);
    for (int m = 0; m < mm; ++m) {
      const double own = lam[n] * model.G(n, f, m);
      const double r = own / total[m];
      wdiag(m, m) = r;
      sdiag(m, m) = own * (1.0 - r);
    }
    post.wiener.push_back(qi * wdiag * q);
    post.cov.push_back(Hermitianize(qi * sdiag * qi_h));
  }
  return post;
}

PosteriorMean BlockPosteriorMean(const FastMnmfModel& model) {
  const MnmfDims& d = model.dims;
  const int mm = d.channels;
  PosteriorMean mean;
  mean.sources = d.sources;
  mean.bins = d.bins;
  mean.channels = mm;
  mean.wiener.assign(size_t(d.sources) * d.bins * mm * mm, 0.0);
  mean.cov.assign(size_t(d.sources) * d.bins * mm * mm, 0.0);

  std::vector<double> lam(size_t(d.sources) * model.frames);
  std::vector<double> rbar(size_t(d.sources) * mm), sbar(size_t(d.sources) * mm);
  for (int f = 0; f < d.bins; ++f) {
    for (int n = 0; n < d.sources; ++n)
      for (int t = 0; t < model.frames; ++t) lam[size_t(n) * model.frames + t] = model.Psd(n, f, t);
    std::fill(rbar.begin(), rbar.end(), 0.0);
    std::fill(sbar.begin(), sbar.end(), 0.0);
    for (int t = 0; t < model.frames; ++t) {
      for (int m = 0; m < mm; ++m) {
        double total = 0.0;
        for (int n = 0; n < d.sources; ++n)
          total += lam[size_t(n) * model.frames + t] * model.G(n, f, m);
        for (int n = 0; n < d.sources; ++n) {
          const double own = lam[size_t(n) * model.frames + t] * model.G(n, f, m);
          const double r = own / total;
          rbar[n * mm + m] += r;
          sbar[n * mm + m] += own * (1.0 - r);
        }
      }
    }
    const cplx* q = &model.q[size_t(f) * mm * mm];
    const cplx* qi = &model.q_inv[size_t(f) * mm * mm];
    for (int n = 0; n < d.sources; ++n) {
      cplx* w = &mean.wiener[(size_t(n) * d.bins + f) * mm * mm];
      cplx* s = &mean.cov[(size_t(n) * d.bins + f) * mm * mm];
      for (int i = 0; i < mm; ++i)
        for (int j = 0; j < mm; ++j) {
          cplx wacc = 0.0, sacc = 0.0;
          for (int k = 0; k < mm; ++k) {
            wacc += qi[i * mm + k] * (rbar[n * mm + k] / model.frames) * q[k * mm + j];
            sacc += qi[i * mm + k] * (sbar[n * mm + k] / model.frames) * std::conj(qi[j * mm + k]);
          }
          w[i * mm + j] = wacc;
          s[i * mm + j] = sacc;
        }
    }
  }
  return mean;
}

PosteriorMean AveragePosteriors(std::span<const std::vector<FramePosterior>> frames_by_bin,
                                int sources, int channels) {
  const int mm = channels;
  PosteriorMean mean;
  mean.sources = sources;
  mean.bins = int(frames_by_bin.size());
  mean.channels = mm;
  mean.wiener.assign(size_t(sources) * mean.bins * mm * mm, 0.0);
  mean.cov.assign(size_t(sources) * mean.bins * mm * mm, 0.0);
  for (int f = 0; f < mean.bins; ++f) {
    const auto& frames = frames_by_bin[f];
    if (frames.empty()) throw Error(ErrorCode::kInvalidArgument, "no frame posteriors");
    const double inv_t = 1.0 / double(frames.size());
    for (const FramePosterior& fp : frames) {
      for (int n = 0; n < sources; ++n) {
        cplx* w = &mean.wiener[(size_t(n) * mean.bins + f) * mm * mm];
        cplx* s = &mean.cov[(size_t(n) * mean.bins + f) * mm * mm];
        for (int i = 0; i < mm * mm; ++i) {
          w[i] += inv_t * fp.wiener[n].data()[i];
          s[i] += inv_t * fp.cov[n].data()[i];
        }
      }
    }
  }
  return mean;
}

PosteriorSnapshot::PosteriorSnapshot(int sources, int bins, int channels)
    : sources_(sources),
      bins_(bins),
      channels_(channels),
      wiener_(size_t(sources) * bins * channels * channels),
      cov_(size_t(sources) * bins * channels * channels) {
  if (sources < 1 || bins < 1 || channels < 1)
    throw Error(ErrorCode::kInvalidArgument, "invalid snapshot dimensions");
}

CMat PosteriorSnapshot::Wiener(int n, int f) const {
  return CMat(channels_, channels_,
              std::span<const cplx>(wiener(n, f), size_t(channels_) * channels_));
}

CMat PosteriorSnapshot::Cov(int n, int f) const {
  return CMat(channels_, channels_,
              std::span<const cplx>(cov(n, f), size_t(channels_) * channels_));
}

PosteriorSnapshot PosteriorSnapshot::PassThrough(int sources, int bins, int channels,
                                                 int target) {
  PosteriorSnapshot snap(sources, bins, channels);
  snap.target_source_ = target;
  for (int f = 0; f < bins; ++f) {
    cplx* w = snap.wiener(target, f);
    for (int m = 0; m < channels; ++m) w[m * channels + m] = 1.0;
  }
  return snap;
}

PosteriorSnapshot PublishSnapshot(const PosteriorMean& block_mean,
                                  const PosteriorSnapshot* previous, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "alpha_bss must lie in (0, 1]");
  const int n_src = block_mean.sources;
  const int bins = block_mean.bins;
  const int mm = block_mean.channels;
  if (previous != nullptr &&
      (previous->sources() != n_src || previous->bins() != bins || previous->channels() != mm))
    throw Error(ErrorCode::kInvalidArgument, "snapshot dimensions changed");
  const double a = previous == nullptr ? 1.0 : alpha;
  PosteriorSnapshot snap(n_src, bins, mm);
  snap.set_block_index(previous == nullptr ? 1 : previous->block_index() + 1);
  if (previous != nullptr) snap.set_target_source(previous->target_source());
  for (int n = 0; n < n_src; ++n)
    for (int f = 0; f < bins; ++f) {
      const size_t off = (size_t(n) * bins + f) * mm * mm;
      cplx* w = snap.wiener(n, f);
      cplx* s = snap.cov(n, f);
      for (int i = 0; i < mm * mm; ++i) {
        w[i] = a * block_mean.wiener[off + i];
        s[i] = a * block_mean.cov[off + i];
      }
      if (previous != nullptr) {
        const cplx* pw = previous->wiener(n, f);
        const cplx* ps = previous->cov(n, f);
        for (int i = 0; i < mm * mm; ++i) {
          w[i] += (1.0 - a) * pw[i];
          s[i] += (1.0 - a) * ps[i];
        }
      }
      for (int i = 0; i < mm; ++i) {
        s[i * mm + i] = s[i * mm + i].real();
        for (int j = i + 1; j < mm; ++j) {
          const cplx v = 0.5 * (s[i * mm + j] + std::conj(s[j * mm + i]));
          s[i * mm + j] = v;
          s[j * mm + i] = std::conj(v);
        }
      }
    }
  return snap;
}

PosteriorSnapshot PublishSnapshot(std::span<const std::vector<FramePosterior>> frames_by_bin,
                                  const PosteriorSnapshot* previous, double alpha) {
  if (frames_by_bin.empty() || frames_by_bin[0].empty())
    throw Error(ErrorCode::kInvalidArgument, "no frame posteriors");
  const auto& first = frames_by_bin[0][0];
  const int sources = int(first.wiener.size());
  const int channels = first.wiener.empty() ? 0 : first.wiener[0].rows();
  return PublishSnapshot(AveragePosteriors(frames_by_bin, sources, channels), previous, alpha);
}

}  // namespace dpse
