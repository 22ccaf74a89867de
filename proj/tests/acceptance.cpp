// SPDX-License-Identifier: Apache-2.0
// Acceptance checks. Prints one PASS/FAIL line per criterion; exits 1 if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kdgan/agkd.hpp"
#include "kdgan/cgkd.hpp"
#include "kdgan/experiment.hpp"
#include "kdgan/gradcheck_suite.hpp"
#include "kdgan/metrics.hpp"

using namespace kdgan;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("kdgan_accept_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TrainConfig smoke_config() {
  return TrainConfig::from_file(std::string(KDGAN_SOURCE_DIR) + "/configs/smoke.json");
}

// ---------------------------------------------------------------------------

Verdict gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckReport r = run_gradcheck_suite("all", 0);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {r.max_rel_error < 1e-4 && secs < 60.0,
          "max_rel_error " + fmt("%.3g", r.max_rel_error) + " in " + fmt("%.2f", secs) + "s"};
}

// Direct loops over rows, texts and pairs.
struct LoopResult {
  Matrix ct, cs;
  double pd = 0.0, kd = 0.0;
};

Matrix loop_correlation(const Matrix& f, const Matrix& t) {
  Matrix c(f.rows(), t.rows());
  for (Index i = 0; i < f.rows(); ++i) {
    double norm = 0.0;
    for (Index k = 0; k < t.rows(); ++k) {
      double dot = 0.0;
      for (Index m = 0; m < f.cols(); ++m) dot += f(i, m) * t(k, m);
      c(i, k) = dot;
      norm += dot * dot;
    }
    for (Index k = 0; k < t.rows(); ++k) c(i, k) /= std::sqrt(norm);
  }
  return c;
}

LoopResult loop_reference(const Matrix& ft, const Matrix& fs_, const Matrix& t) {
  LoopResult r;
  r.ct = loop_correlation(ft, t);
  r.cs = loop_correlation(fs_, t);
  const Index b = ft.rows(), k = t.rows();
  for (Index i = 0; i < b; ++i)
    for (Index j = 0; j < b; ++j) {
      if (i == j) continue;
      double dot = 0.0, ni = 0.0, nj = 0.0;
      for (Index c = 0; c < k; ++c) {
        dot += r.ct(i, c) * r.ct(j, c);
        ni += r.ct(i, c) * r.ct(i, c);
        nj += r.ct(j, c) * r.ct(j, c);
      }
      r.pd += dot / std::sqrt(ni * nj);
    }
  for (Index i = 0; i < b; ++i)
    for (Index c = 0; c < k; ++c) r.kd += std::abs(r.ct(i, c) - r.cs(i, c));
  r.kd /= static_cast<double>(b * k);
  return r;
}

TextFeatureSet texts_of(const Matrix& t) {
  std::vector<std::string> labels;
  for (Index k = 0; k < t.rows(); ++k) labels.push_back("class " + std::to_string(k));
  return TextFeatureSet(t, labels);
}

Verdict cgkd_oracle() {
  RngStream rng(11, "cgkd");
  double worst = 0.0;
  for (Index b : {2, 3, 4})
    for (Index k : {2, 3})
      for (Index m : {2, 5}) {
        Matrix ft = rng.normal_matrix(b, m), fs_ = rng.normal_matrix(b, m);
        Matrix t = rng.normal_matrix(k, m);
        LoopResult ref = loop_reference(ft, fs_, t);
        TextFeatureSet texts = texts_of(t);
        auto ct = cgkd::build_correlation(FeatureBatch{ft}, texts, cgkd::Source::teacher);
        auto cs = cgkd::build_correlation(FeatureBatch{fs_}, texts, cgkd::Source::student);
        const double pd = cgkd::pairwise_diversity_loss(ct).item();
        const double kd = cgkd::correlation_kd_loss(ct, cs).item();
        worst = std::max({worst, (ct.data.value() - ref.ct).cwiseAbs().maxCoeff(),
                          (cs.data.value() - ref.cs).cwiseAbs().maxCoeff(), std::abs(pd - ref.pd),
                          std::abs(kd - ref.kd)});
      }
  return {worst < 1e-8, "max abs diff " + fmt("%.3g", worst) + " over 12 shapes"};
}

Verdict gate_statistics() {
  RngStream s(42, "gate");
  bool extremes = true;
  for (int i = 0; i < 1000; ++i) {
    extremes = extremes && agkd::sample_gate({1.0, &s});
    extremes = extremes && !agkd::sample_gate({0.0, &s});
  }
  int open = 0;
  for (int i = 0; i < 10000; ++i) open += agkd::sample_gate({0.7, &s}) ? 1 : 0;
  const double rate = open / 10000.0;
  return {extremes && rate >= 0.68 && rate <= 0.72,
          "p=0.7 open rate " + fmt("%.4f", rate) + (extremes ? ", extremes exact" : ", extremes wrong")};
}

Verdict scale_invariance() {
  RngStream rng(5, "scale");
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    Matrix ft = rng.normal_matrix(6, 4), fs_ = rng.normal_matrix(6, 4);
    TextFeatureSet texts = texts_of(rng.normal_matrix(3, 4));
    auto base_t = cgkd::build_correlation(FeatureBatch{ft}, texts, cgkd::Source::teacher);
    auto base_s = cgkd::build_correlation(FeatureBatch{fs_}, texts, cgkd::Source::student);
    const double pd = cgkd::pairwise_diversity_loss(base_t).item();
    const double kd = cgkd::correlation_kd_loss(base_t, base_s).item();
    for (double alpha : {0.1, 10.0}) {
      auto st = cgkd::build_correlation(FeatureBatch{Matrix(alpha * ft)}, texts, cgkd::Source::teacher);
      auto ss = cgkd::build_correlation(FeatureBatch{Matrix(alpha * fs_)}, texts, cgkd::Source::student);
      worst = std::max({worst, (st.data.value() - base_t.data.value()).cwiseAbs().maxCoeff(),
                        (ss.data.value() - base_s.data.value()).cwiseAbs().maxCoeff(),
                        std::abs(cgkd::pairwise_diversity_loss(st).item() - pd),
                        std::abs(cgkd::correlation_kd_loss(st, ss).item() - kd)});
    }
  }
  return {worst < 1e-6, "max change " + fmt("%.3g", worst) + " for alpha in {0.1, 10}"};
}

metrics::FeatureStats gaussian(Vector mean, Matrix cov) {
  metrics::FeatureStats s;
  s.mean = std::move(mean);
  s.covariance = std::move(cov);
  s.n = 1000;
  return s;
}

Verdict frechet_oracles() {
  RngStream rng(3, "fd");
  Matrix x = rng.normal_matrix(400, 3);
  auto sx = metrics::FeatureStats::from_features(x);
  const double same = metrics::frechet_distance(sx, sx);

  // 1-D: N(0, 1) vs N(1, 4) -> 1 + 1 + 4 - 2 * 2 = 2.
  const double one_d = metrics::frechet_distance(gaussian(Vector::Zero(1), Matrix::Identity(1, 1)),
                                                 gaussian(Vector::Ones(1), Matrix::Constant(1, 1, 4.0)));

  // Diagonal covariances separate per dimension.
  Vector ma(3), mb(3), va(3), vb(3);
  ma << 0.5, -1.0, 2.0;
  mb << 1.5, 0.0, -1.0;
  va << 1.0, 2.0, 0.5;
  vb << 3.0, 0.25, 0.5;
  double diag_ref = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double a = va(i) + 1e-6, b = vb(i) + 1e-6;
    diag_ref += (ma(i) - mb(i)) * (ma(i) - mb(i)) + a + b - 2.0 * std::sqrt(a * b);
  }
  const double diag = metrics::frechet_distance(gaussian(ma, Matrix(va.asDiagonal())),
                                                gaussian(mb, Matrix(vb.asDiagonal())));
  const double err = std::max({std::abs(same), std::abs(one_d - 2.0), std::abs(diag - diag_ref)});
  return {err < 1e-6, "identical " + fmt("%.2g", same) + ", 1-D " + fmt("%.9f", one_d) +
                          ", diagonal error " + fmt("%.2g", std::abs(diag - diag_ref))};
}

Verdict inception_oracles() {
  const double uniform = metrics::inception_style_score(Matrix::Constant(10, 5, 0.2));
  const double onehot = metrics::inception_style_score(Matrix::Identity(5, 5));
  return {std::abs(uniform - 1.0) < 1e-9 && std::abs(onehot - 5.0) < 1e-9,
          "uniform " + fmt("%.12g", uniform) + ", one-hot " + fmt("%.12g", onehot)};
}

// Plain GAN loop built from the model and autodiff primitives only.
struct PlainAdam {
  double lr, b1, b2, eps;
  long t = 0;
  std::vector<Matrix> m, v;

  void step(ParamSet& p, const std::vector<Matrix>& g) {
    if (m.empty())
      for (std::size_t i = 0; i < p.size(); ++i) {
        m.push_back(Matrix::Zero(p.value(i).rows(), p.value(i).cols()));
        v.push_back(m.back());
      }
    ++t;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < p.size(); ++i)
      for (Index r = 0; r < g[i].rows(); ++r)
        for (Index c = 0; c < g[i].cols(); ++c) {
          const double gi = g[i](r, c);
          m[i](r, c) = b1 * m[i](r, c) + (1.0 - b1) * gi;
          v[i](r, c) = b2 * v[i](r, c) + (1.0 - b2) * (gi * gi);
          p.value(i)(r, c) -= lr * (m[i](r, c) / c1) / (std::sqrt(v[i](r, c) / c2) + eps);
        }
  }
};

Verdict plain_gan_equivalence() {
  TrainConfig cfg = smoke_config();
  cfg.loss.w_agkd = 0.0;
  cfg.loss.w_cgkd = 0.0;
  cfg.loss.w_pd = 0.0;
  cfg.train.master_seed = 17;
  auto data = std::make_shared<const Dataset>(load_subset(cfg.dataset_spec()));
  auto teacher = TeacherRegistry::instance().create(cfg.teacher, data->shape);
  Trainer trainer(cfg, data, teacher);

  const GanArch arch = cfg.arch(data->num_classes());
  GanParams p = init_params(arch, cfg.train.master_seed);
  const std::uint64_t seed = cfg.train.master_seed;
  RngStream batch(seed, "batch"), noise(seed, "noise"), aug(seed, "augment");
  PlainAdam opt_g{cfg.optim.g_lr, cfg.optim.beta1, cfg.optim.beta2, cfg.optim.eps};
  PlainAdam opt_d{cfg.optim.d_lr, cfg.optim.beta1, cfg.optim.beta2, cfg.optim.eps};
  const Index b = cfg.train.batch_size;
  const int n = static_cast<int>(data->size());

  int mismatched = 0;
  std::vector<std::string> extra_keys;
  for (int step = 0; step < 100; ++step) {
    // Discriminator: -E log sigmoid(D(x)) - E log(1 - sigmoid(D(G(z)))).
    std::vector<Index> rows(static_cast<std::size_t>(b));
    for (auto& r : rows) r = batch.uniform_int(0, n - 1);
    Matrix real = data->gather(rows, false).data;
    Matrix z = sample_noise(noise, b, arch.latent_dim).data;
    Matrix fake = generate(arch, p.g, NoiseBatch{z}).data;
    AugmentDraw draw = draw_augment(aug, b, arch.image);
    ad::Var xr = apply_augment(ad::Var::constant(real), arch.image, draw);
    ad::Var xf = apply_augment(ad::Var::constant(fake), arch.image, draw);
    BoundParams d(p.d, true);
    ad::Var sr = discriminate(arch, d, xr, {}).scores;
    ad::Var sf = discriminate(arch, d, xf, {}).scores;
    ad::Var d_loss = -1.0 * (-1.0 * ad::mean(ad::softplus(-1.0 * sr)) + -1.0 * ad::mean(ad::softplus(sf)));
    ad::backward(d_loss);
    opt_d.step(p.d, d.grads());

    // Generator: -E log sigmoid(D(G(z))).
    Matrix z2 = sample_noise(noise, b, arch.latent_dim).data;
    BoundParams g(p.g, true);
    ad::Var gen = generate(arch, g, ad::Var::constant(z2), {});
    ad::Var gen_in = apply_augment(gen, arch.image, draw_augment(aug, b, arch.image));
    BoundParams dfix(p.d, false);
    ad::Var g_loss = -1.0 * (-1.0 * ad::mean(ad::softplus(-1.0 * discriminate(arch, dfix, gen_in, {}).scores)));
    ad::backward(g_loss);
    opt_g.step(p.g, g.grads());

    StepMetrics m = trainer.train_step();
    if (m.values.at("d_loss") != d_loss.item() || m.values.at("g_loss") != g_loss.item()) ++mismatched;
    for (const auto& [k, v] : m.values)
      if (k != "d/adv" && k != "g/adv" && k != "d_loss" && k != "g_loss" && k != "grad_norm/d" &&
          k != "grad_norm/g")
        extra_keys.push_back(k);
  }
  const bool params_equal =
      trainer.params().g.hash() == p.g.hash() && trainer.params().d.hash() == p.d.hash();
  bool bitwise = params_equal;
  for (std::size_t i = 0; i < p.g.size(); ++i) bitwise = bitwise && trainer.params().g.value(i) == p.g.value(i);
  for (std::size_t i = 0; i < p.d.size(); ++i) bitwise = bitwise && trainer.params().d.value(i) == p.d.value(i);
  return {bitwise && mismatched == 0 && extra_keys.empty(),
          std::string("100 steps, params ") + (bitwise ? "bitwise equal" : "differ") + ", " +
              std::to_string(mismatched) + " loss mismatches, " + std::to_string(extra_keys.size()) +
              " KD metric rows"};
}

double metric_at(const fs::path& csv, std::int64_t step, const std::string& name) {
  std::ifstream in(csv);
  std::string line;
  const std::string prefix = std::to_string(step) + "," + name + ",";
  while (std::getline(in, line))
    if (line.rfind(prefix, 0) == 0) return std::stod(line.substr(prefix.size()));
  return std::nan("");
}

Verdict smoke_runs() {
  const fs::path root = scratch("smoke");
  std::string detail;
  bool all_finite = true;
  int fid_down[2] = {0, 0};
  std::vector<double> modes[2];
  for (int on = 1; on >= 0; --on)
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      TrainConfig cfg = smoke_config();
      cfg.cgkd.enabled = on == 1;
      cfg.train.master_seed = seed;
      cfg.run.out_root = root.string();
      cfg.run.name = std::string(on ? "on_" : "off_") + std::to_string(seed);
      double start = std::nan(""), end = std::nan("");
      try {
        RunResult r = run_experiment(cfg);
        start = metric_at(fs::path(r.run_dir) / "metrics.csv", 0, "eval/teacher_fid");
        end = r.final_eval.at("eval/teacher_fid");
        modes[on].push_back(r.final_eval.at("eval/modes_covered"));
        for (const auto& [k, v] : r.final_eval) all_finite = all_finite && std::isfinite(v);
      } catch (const std::exception& e) {
        all_finite = false;
        detail += std::string(" [") + cfg.run.name + ": " + e.what() + "]";
        modes[on].push_back(0.0);
      }
      all_finite = all_finite && std::isfinite(start) && std::isfinite(end);
      if (end < start) ++fid_down[on];
    }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double med_on = median(modes[1]), med_off = median(modes[0]);
  fs::remove_all(root);
  return {all_finite && fid_down[1] >= 4 && fid_down[0] >= 4 && med_on >= med_off,
          "FID decreased in " + std::to_string(fid_down[1]) + "/5 (CGKD on) and " +
              std::to_string(fid_down[0]) + "/5 (off), median modes " + fmt("%g", med_on) +
              " vs " + fmt("%g", med_off) + (all_finite ? "" : ", non-finite values") + detail};
}

// Same parameters, optimizer moments, counters and stream states.
bool same_state(const fs::path& a, const fs::path& b) {
  CheckpointRecord x = read_checkpoint(a.string()), y = read_checkpoint(b.string());
  if (x.step != y.step || x.rng_states != y.rng_states || x.counters != y.counters ||
      x.arrays.size() != y.arrays.size())
    return false;
  for (std::size_t i = 0; i < x.arrays.size(); ++i)
    if (x.arrays[i].first != y.arrays[i].first || x.arrays[i].second != y.arrays[i].second) return false;
  return true;
}

Verdict reproducibility() {
  const fs::path root = scratch("repro");
  TrainConfig cfg = smoke_config();
  cfg.train.steps = 800;
  cfg.run.out_root = root.string();
  cfg.run.name = "a";
  RunResult a = run_experiment(cfg);
  cfg.run.name = "b";
  RunResult b = run_experiment(cfg);
  const bool same = slurp(fs::path(a.run_dir) / "metrics.csv") == slurp(fs::path(b.run_dir) / "metrics.csv") &&
                    same_state(fs::path(a.run_dir) / "checkpoints" / "step_000800.ckpt",
                               fs::path(b.run_dir) / "checkpoints" / "step_000800.ckpt");

  cfg.run.name = "c";
  cfg.train.steps = 500;
  run_experiment(cfg);
  cfg.train.steps = 800;
  RunOptions opts;
  opts.resume_checkpoint = (root / "c" / "checkpoints" / "step_000500.ckpt").string();
  RunResult c = run_experiment(cfg, opts);
  const bool resumed = slurp(fs::path(a.run_dir) / "metrics.csv") == slurp(fs::path(c.run_dir) / "metrics.csv") &&
                       same_state(fs::path(a.run_dir) / "checkpoints" / "step_000800.ckpt",
                                  fs::path(c.run_dir) / "checkpoints" / "step_000800.ckpt");
  const bool frozen = a.teacher_fingerprint_start == a.teacher_fingerprint_end;
  fs::remove_all(root);
  return {same && resumed && frozen,
          std::string("repeat run ") + (same ? "identical" : "differs") + ", resume from 500 " +
              (resumed ? "identical" : "differs") + ", teacher " + (frozen ? "unchanged" : "changed")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gradient checks", gradients},
      {"correlation loop oracle", cgkd_oracle},
      {"gate statistics", gate_statistics},
      {"correlation scale invariance", scale_invariance},
      {"Frechet distance oracles", frechet_oracles},
      {"inception-style score oracles", inception_oracles},
      {"KD-off equals plain GAN", plain_gan_equivalence},
      {"smoke training", smoke_runs},
      {"reproducibility and resume", reproducibility},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    std::printf("[%s] %zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                v.detail.c_str());
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
