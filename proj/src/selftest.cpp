#include "imfvqa/selftest.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "imfvqa/imf.hpp"
#include "imfvqa/svmgen.hpp"
#include "imfvqa/synthetic.hpp"

namespace imfvqa::selftest {

namespace {

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

}  // namespace

training::TrainConfig tiny_config() {
  training::TrainConfig cfg;
  cfg.imf.image_dim = 4;
  cfg.imf.point_dim = 5;
  cfg.imf.image_hidden = 6;
  cfg.imf.point_hidden = 5;
  cfg.imf.image_embed = 4;
  cfg.imf.point_embed = 3;
  cfg.imf.head_hidden = 5;
  cfg.imf.latent_dim = 3;
  cfg.decoder.model_dim = 4;
  cfg.decoder.vision_token_count = 2;
  cfg.decoder.max_question_len = 8;
  cfg.decoder.max_answer_len = 4;
  cfg.decoder.ff_dim = 6;
  cfg.decoder.projector_hidden = 5;
  cfg.kl_weight = 0.5;
  return cfg;
}

GradCheck gradient_check(std::uint64_t seed, double h) {
  const training::TrainConfig cfg = tiny_config();
  synthetic::SyntheticTaskSpec spec;
  spec.image_dim = cfg.imf.image_dim;
  spec.point_dim = cfg.imf.point_dim;
  spec.train_count = 3;
  spec.test_count = 1;
  const auto data = synthetic::make_synthetic_dataset(spec, seed);
  std::vector<std::string> texts;
  for (const auto& e : data.train) {
    texts.push_back(e.question);
    texts.push_back(e.answer);
  }
  Rng rng(derive_seed(seed, "gradcheck"));
  training::Model model = training::make_model(cfg, decoder::Vocab::build(texts), rng);
  const auto draws = training::draw_noise(data.train, model, 0.5, rng);

  model.zero_grad();
  training::total_loss_backward(data.train, draws, model, cfg.kl_weight);
  auto named = model.named_parameters();
  std::vector<num::Parameter*> params;
  for (auto& [name, p] : named) params.push_back(p);
  const auto numeric = num::finite_diff_grad(
      [&] { return training::total_loss(data.train, draws, model, cfg.kl_weight).total; }, params, h);

  GradCheck out;
  for (std::size_t k = 0; k < named.size(); ++k) {
    const double err = num::max_relative_error(named[k].second->grad.data(), numeric[k].data());
    out.coordinates += numeric[k].size();
    if (err > out.max_rel_error || out.worst_parameter.empty()) {
      out.max_rel_error = err;
      out.worst_parameter = named[k].first;
    }
  }
  return out;
}

KlCheck kl_oracle(std::uint64_t seed, std::size_t gaussians, std::size_t samples) {
  KlCheck out;
  out.gaussians = gaussians;
  const double g0 = imf::kl_loss({{0.0}, {0.0}});
  const double g1 = imf::kl_loss({{1.0}, {0.0}});
  const double g2 = imf::kl_loss({{0.0}, {std::log(2.0)}});
  out.golden_ok = g0 == 0.0 && std::abs(g1 - 0.5) <= 1e-12 && std::abs(g2 - (1.5 - std::log(2.0))) <= 1e-12;

  Rng rng(derive_seed(seed, "kl-oracle"));
  for (std::size_t g = 0; g < gaussians; ++g) {
    const std::size_t dim = 1 + rng.below(4);
    imf::GaussianEmbedding q;
    for (std::size_t d = 0; d < dim; ++d) {
      q.mu.push_back(rng.uniform(-2.0, 2.0));
      q.log_sigma.push_back(rng.uniform(-1.0, 1.0));
    }
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      double log_ratio = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double e = rng.normal();
        const double z = q.mu[d] + std::exp(q.log_sigma[d]) * e;
        log_ratio += -q.log_sigma[d] - 0.5 * e * e + 0.5 * z * z;
      }
      sum += log_ratio;
      sum_sq += log_ratio * log_ratio;
    }
    const double n = static_cast<double>(samples);
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    const double se = std::sqrt(var / n);
    const double z = std::abs(imf::kl_loss(q) - mean) / std::max(se, 1e-300);
    out.worst_z = std::max(out.worst_z, z);
  }
  return out;
}

SamplingCheck sampling_statistics(std::uint64_t seed, std::size_t samples) {
  const imf::GaussianEmbedding g{{0.5, -1.25, 2.0}, {0.0, -0.7, 0.4}};
  const std::size_t dim = g.mu.size();
  SamplingCheck out;
  out.zero_eps_exact = imf::sample_z(g, imf::Vector(dim, 0.0)) == g.mu;

  Rng rng(derive_seed(seed, "sampling"));
  std::vector<double> sum(dim, 0.0);
  std::vector<double> sum_sq(dim, 0.0);
  imf::Vector eps(dim);
  for (std::size_t s = 0; s < samples; ++s) {
    for (auto& e : eps) e = rng.normal();
    const auto z = imf::sample_z(g, eps);
    for (std::size_t d = 0; d < dim; ++d) {
      sum[d] += z[d];
      sum_sq[d] += z[d] * z[d];
    }
  }
  const double n = static_cast<double>(samples);
  for (std::size_t d = 0; d < dim; ++d) {
    const double sigma = std::exp(g.log_sigma[d]);
    const double mean = sum[d] / n;
    const double var = (sum_sq[d] - n * mean * mean) / (n - 1.0);
    out.worst_mean_z = std::max(out.worst_mean_z, std::abs(mean - g.mu[d]) / (sigma / std::sqrt(n)));
    out.worst_var_ratio_dev = std::max(out.worst_var_ratio_dev, std::abs(var / (sigma * sigma) - 1.0));
  }
  return out;
}

QaCheck qa_round_trip(std::uint64_t seed, std::size_t scenes) {
  const svmgen::RelationThresholds cfg;
  Rng rng(derive_seed(seed, "qa-scenes"));
  std::vector<svmgen::SceneAnnotation> batch;
  for (std::size_t i = 0; i < scenes; ++i) {
    batch.push_back(svmgen::random_scene(rng, "scene" + std::to_string(i), cfg));
  }
  const auto pairs = svmgen::generate_corpus(batch, cfg, seed);
  const std::string text = svmgen::encode_corpus(pairs);
  QaCheck out;
  out.scenes = scenes;
  out.pairs = pairs.size();
  out.round_trip = svmgen::decode_corpus(text) == pairs;
  out.deterministic = svmgen::encode_corpus(svmgen::generate_corpus(batch, cfg, seed)) == text &&
                      svmgen::parse_scenes(svmgen::dump_scenes(batch)) == batch;
  out.hops_consistent = true;
  for (const auto& q : pairs) {
    if (q.provenance.size() != static_cast<std::size_t>(q.hops)) out.hops_consistent = false;
  }
  return out;
}

std::vector<CheckResult> run_all(std::uint64_t seed, const std::function<void(const CheckResult&)>& report) {
  std::vector<CheckResult> results;
  auto run = [&](const char* name, const std::function<std::pair<bool, std::string>()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    r.name = name;
    try {
      std::tie(r.passed, r.detail) = body();
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (report) report(r);
    results.push_back(std::move(r));
  };

  run("gradient-check", [&] {
    double worst = 0.0;
    std::string where;
    for (std::uint64_t s = 0; s < 5; ++s) {
      const auto g = gradient_check(derive_seed(seed, s));
      if (g.max_rel_error >= worst) {
        worst = g.max_rel_error;
        where = g.worst_parameter;
      }
    }
    return std::pair{worst < 1e-4, fmt("max relative error %.3g over 5 seeds", worst) + " (worst: " + where + ")"};
  });
  run("kl-oracle", [&] {
    const auto k = kl_oracle(seed);
    return std::pair{k.golden_ok && k.worst_z < 3.0,
                     std::string(k.golden_ok ? "closed-form values exact" : "closed-form values WRONG") +
                         fmt(", worst Monte-Carlo deviation %.2f standard errors", k.worst_z)};
  });
  run("sampling-statistics", [&] {
    const auto s = sampling_statistics(seed);
    return std::pair{s.zero_eps_exact && s.worst_mean_z < 4.0 && s.worst_var_ratio_dev < 0.05,
                     fmt("mean deviation %.2f sigma/sqrt(N), variance ratio deviation %.4f", s.worst_mean_z,
                         s.worst_var_ratio_dev) +
                         (s.zero_eps_exact ? ", eps=0 gives mu exactly" : ", eps=0 does NOT give mu")};
  });
  run("qa-round-trip", [&] {
    const auto q = qa_round_trip(seed);
    return std::pair{q.round_trip && q.deterministic && q.hops_consistent && q.pairs > 0,
                     std::to_string(q.pairs) + " pairs from " + std::to_string(q.scenes) + " scenes" +
                         (q.round_trip ? "" : ", decode mismatch") + (q.deterministic ? "" : ", nondeterministic") +
                         (q.hops_consistent ? "" : ", hop count mismatch")};
  });
  return results;
}

}  // namespace imfvqa::selftest
