// Acceptance suite: runs the ten criteria on the default synthetic world and
// prints one PASS/FAIL line per criterion. Exit status is non-zero when any
// criterion fails.
//
//   acceptance <work-dir> [criterion ...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "hoiprompt/checkpoint.hpp"
#include "hoiprompt/gradaudit.hpp"
#include "hoiprompt/pipeline.hpp"
#include "oracles.hpp"

using namespace hoi;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void note(const std::string& s) { std::cerr << "  . " << s << "\n"; }

struct Context {
  std::string work;
  RunConfig config;  // defaults, UV split
  std::string data_dir;
  DatasetBundle uv;
};

// 1. finite-difference audit of every trainable group, 64-bit, three seeds
Outcome gradient_suite(const Context& ctx) {
  const auto t0 = Clock::now();
  RunConfig c = ctx.config;
  c.precision = 64;
  const auto enc = load_encoder<double>(ctx.uv);
  bool ok = true;
  double worst = 0;
  std::string failed;
  for (std::uint64_t seed : {1, 2, 3}) {
    AuditOptions opt;
    opt.seed = seed;
    const auto checks = audit_gradients(c, enc, ctx.uv.world, ctx.uv.split, ctx.uv.guidance, opt);
    std::set<std::string> groups;
    for (const auto& g : checks) {
      if (g.frozen) continue;
      groups.insert(g.group);
      worst = std::max(worst, g.rel_error);
      if (!g.passed || !g.used) {
        ok = false;
        failed += " " + g.group + "@" + std::to_string(seed);
      }
    }
    for (const auto& g : trainable_groups())
      if (!groups.count(g)) {
        ok = false;
        failed += " missing:" + g;
      }
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 300;
  return {ok, fmt("%.0f groups x 3 seeds, worst rel.err %.2e, %.0f s", static_cast<double>(trainable_groups().size()), worst, secs) +
                  (failed.empty() ? "" : ", failed:" + failed)};
}

// 2. every guidance adapter and the inter fusion are exact identities at initialization
Outcome zero_init_identity(const Context& ctx) {
  RunConfig c = ctx.config;
  c.precision = 64;
  const auto enc = load_encoder<double>(ctx.uv);
  HoiModel<double> full(c, enc, ctx.uv.world, ctx.uv.split, ctx.uv.guidance);
  RunConfig plain_cfg = c;
  plain_cfg.toggles = ablation_row(0);
  HoiModel<double> plain(plain_cfg, enc, ctx.uv.world, ctx.uv.split, ctx.uv.guidance);
  const auto& bank = full.bank();
  const auto& g = full.guidance();
  const auto base = bank.base_text();
  long checks = 0, bad = 0;
  auto expect = [&](bool cond) {
    ++checks;
    bad += !cond;
  };

  const int n_classes = static_cast<int>(ctx.uv.world.classes.size());
  for (int i = 0; i < bank.depth(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    for (int cl = 0; cl < n_classes; ++cl)
      expect(bank.llm_guide(i, base[k], g.descriptions[static_cast<std::size_t>(cl)]).value() == base[k].value());
  }
  // refined unseen prompts equal their guided prompts, which equal h_T
  for (int u : ctx.uv.split.unseen) {
    const auto prompts = full.class_prompts(u);
    for (int i = 0; i < bank.depth(); ++i) expect(prompts[static_cast<std::size_t>(i)].value() == base[static_cast<std::size_t>(i)].value());
  }
  std::vector<int> all(static_cast<std::size_t>(n_classes));
  for (int cl = 0; cl < n_classes; ++cl) all[static_cast<std::size_t>(cl)] = cl;
  expect(full.text_features(all).value() == plain.text_features(all).value());

  const auto scenes = ctx.uv.world.test_scenes();
  for (std::size_t s = 0; s < scenes.size(); s += 10) {
    const auto in = full.prepare(*scenes[s]);
    const auto vp = full.visual_prompts(in);
    for (int i = 0; i < bank.depth(); ++i) expect(vp[static_cast<std::size_t>(i)].value() == bank.visual_base()[static_cast<std::size_t>(i)].value());
    expect(full.visual_grid(in).value() == plain.visual_grid(plain.prepare(*scenes[s])).value());
    if (!in.pairs.empty()) {
      const Tensor<double> grid = full.visual_grid(in);
      const Tensor<double> pairs = Tensor<double>::constant(matmul(Tensor<double>::constant(in.roi_union), grid).value());
      expect(full.inter()(pairs).value() == pairs.value());
    }
  }
  return {bad == 0, std::to_string(checks) + " exact comparisons, " + std::to_string(bad) + " mismatches"};
}

// 3. encoder checksum unchanged over five epochs; no gradient reaches F_txt or f_vis
Outcome frozen_core(const Context& ctx) {
  RunConfig c = ctx.config;
  c.precision = 32;
  const auto enc = load_encoder<float>(ctx.uv);
  const std::uint64_t before = enc->checksum();
  HoiModel<float> model(c, enc, ctx.uv.world, ctx.uv.split, ctx.uv.guidance);
  Trainer<float> trainer(model, ctx.uv.world, ctx.uv.split);

  bool grad_ok = true;
  {
    std::vector<const SceneInputs<float>*> batch;
    std::vector<const Matrix<float>*> targets;
    for (std::size_t i = 0; i < 4; ++i) {
      batch.push_back(&trainer.inputs(i));
      targets.push_back(&trainer.targets(i));
    }
    batch_loss(model, batch, targets).backward();
    for (const auto* in : batch) grad_ok = grad_ok && !in->frozen_features.requires_grad() && !in->frozen_features.has_grad();
    for (const auto& d : model.guidance().descriptions) grad_ok = grad_ok && !d.requires_grad() && !d.has_grad();
    for (const auto& d : model.guidance().disparities)
      if (d.defined()) grad_ok = grad_ok && !d.has_grad();
    for (const auto& p : enc->store().params()) grad_ok = grad_ok && !p.tensor.requires_grad() && !p.tensor.has_grad();
    model.params().zero_grad();
  }
  const std::uint64_t trainable_before = model.params().checksum(true);
  for (int e = 1; e <= 5; ++e) trainer.train_epoch(e);
  const bool same = enc->checksum() == before;
  const bool moved = model.params().checksum(true) != trainable_before;
  return {same && grad_ok && moved, std::string("encoder checksum ") + (same ? "unchanged" : "CHANGED") +
                                        " after 5 epochs, trainable state " + (moved ? "changed" : "UNCHANGED") +
                                        ", frozen-path gradients " + (grad_ok ? "absent" : "PRESENT")};
}

// 4. library selection, matching and AP against brute-force oracles
Outcome oracle_equivalence(const Context&) {
  Rng rng(2024);
  int related_bad = 0, pairs_bad = 0, match_bad = 0, ap_bad = 0;
  double ap_worst = 0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    Matrix<double> d(16, 5);
    for (Index i = 0; i < d.size(); ++i) d.data()[i] = static_cast<double>(rng.integer(-3, 3));
    std::vector<int> seen;
    for (int cl = 0; cl < 16; ++cl)
      if (rng.bernoulli(0.6)) seen.push_back(cl);
    if (seen.empty()) seen.push_back(rng.integer(0, 15));
    const int u = rng.integer(0, 15);
    related_bad += select_related_seen(d, u, seen) != oracle::related_seen(d, u, seen);

    const int n_verbs = rng.integer(1, 4);
    const auto classes = oracle::random_classes(rng, n_verbs, t % 10 == 0 ? 5 : 0);
    Matrix<double> desc = init::normal<double>(rng, static_cast<Index>(classes.size()), 4, 1.0);
    if (t % 5 == 0) desc = desc.array().round();
    pairs_bad += select_hoi_pairs_per_action(desc, classes, n_verbs).classes != oracle::pair_min(desc, classes, n_verbs);

    const auto [preds, gts] = oracle::matching_instance(rng);
    match_bad += match_predictions(preds, gts) != oracle::enumerate_matching(preds, gts);

    const auto [tp, n_gt] = oracle::ap_instance(rng);
    const double err = std::abs(average_precision(tp, n_gt) - oracle::hand_ap(tp, n_gt));
    ap_worst = std::max(ap_worst, err);
    ap_bad += err > 1e-6;
  }
  const bool ok = related_bad + pairs_bad + match_bad + ap_bad == 0;
  return {ok, std::to_string(trials) + " trials each; mismatches: related-seen " + std::to_string(related_bad) + ", pair-select " +
                  std::to_string(pairs_bad) + ", matching " + std::to_string(match_bad) + ", AP " + std::to_string(ap_bad) +
                  fmt(" (worst AP error %.1e)", ap_worst)};
}

// 5. defining predicate of every split mode, and no unseen positive in training
Outcome split_soundness(const Context& ctx) {
  std::string detail;
  bool ok = true;
  for (SplitMode mode : {SplitMode::UnseenVerb, SplitMode::UnseenObject, SplitMode::RareFirst, SplitMode::NonRareFirst}) {
    const DatasetBundle data = load_dataset(ctx.data_dir, mode);
    const World& w = data.world;
    std::set<int> seen_verbs, seen_objects;
    for (int cl : data.split.seen) {
      seen_verbs.insert(w.classes[static_cast<std::size_t>(cl)].verb);
      seen_objects.insert(w.classes[static_cast<std::size_t>(cl)].object);
    }
    int hold = 0;
    for (int u : data.split.unseen) {
      const auto& cl = w.classes[static_cast<std::size_t>(u)];
      const bool composition = seen_verbs.count(cl.verb) && seen_objects.count(cl.object);
      bool h = false;
      switch (mode) {
        case SplitMode::UnseenVerb: h = !seen_verbs.count(cl.verb); break;
        case SplitMode::UnseenObject: h = !seen_objects.count(cl.object); break;
        case SplitMode::RareFirst: h = cl.train_count < 10 && composition; break;
        case SplitMode::NonRareFirst: h = cl.train_count >= 10 && composition; break;
      }
      hold += h;
    }
    int leaks = 0;
    for (const Scene* s : training_scenes(w, data.split))
      for (const auto& it : s->interactions) leaks += data.split.is_unseen(it.hoi);
    const int n = static_cast<int>(data.split.unseen.size());
    ok = ok && n > 0 && hold == n && leaks == 0;
    detail += std::string(detail.empty() ? "" : "; ") + to_string(mode) + " " + std::to_string(hold) + "/" + std::to_string(n) +
              " unseen hold, " + std::to_string(leaks) + " leaks";
  }
  return {ok, detail};
}

struct LadderResult {
  std::map<int, std::map<std::uint64_t, EvalReport>> reports;  // row -> seed -> report
  std::map<int, std::map<std::uint64_t, int>> epochs;
  double seconds = 0;
};

LadderResult run_ladder(const Context& ctx) {
  LadderResult r;
  const auto t0 = Clock::now();
  for (int row : {2, 3, 4, 6}) {
    for (std::uint64_t seed : {1, 2, 3}) {
      RunConfig c = ctx.config;
      c.toggles = ablation_row(row);
      c.seed = seed;
      c.out_dir = (fs::path(ctx.work) / ("ladder_row" + std::to_string(row) + "_seed" + std::to_string(seed))).string();
      const auto t = run_training<float>(c, ctx.uv);
      r.reports[row][seed] = run_evaluation<float>(c, ctx.uv, t.checkpoint);
      r.epochs[row][seed] = static_cast<int>(t.epochs.size());
      const auto& rep = r.reports[row][seed];
      note(fmt("row %.0f seed %.0f: seen %.4f unseen %.4f", row, static_cast<double>(seed), rep.map_seen, rep.map_unseen) +
           " (" + std::to_string(t.epochs.size()) + " epochs)");
    }
  }
  r.seconds = seconds_since(t0);
  return r;
}

// 6. full configuration: seen >= 0.60 and unseen above the unguided row in every seed
Outcome end_to_end(const LadderResult& ladder) {
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto& full = ladder.reports.at(6).at(seed);
    const auto& base = ladder.reports.at(2).at(seed);
    ok = ok && full.map_seen >= 0.60 && full.map_unseen > base.map_unseen;
    detail += fmt("seed %.0f: seen %.3f, unseen %.3f vs %.3f; ", static_cast<double>(seed), full.map_seen, full.map_unseen,
                  base.map_unseen);
  }
  // half the ladder is rows 2 and 6
  const double share = ladder.seconds / 2;
  detail += fmt("rows 2+6 wall %.0f s", share);
  return {ok && share < 1800, detail};
}

// 7. UTPL over LLM-only guidance, mean unseen over seeds
Outcome ablation_direction(const LadderResult& ladder) {
  double llm = 0, utpl = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    llm += ladder.reports.at(3).at(seed).map_unseen / 3;
    utpl += ladder.reports.at(4).at(seed).map_unseen / 3;
  }
  return {utpl > llm, fmt("mean unseen: +llm %.4f, +utpl %.4f (delta %+.4f)", llm, utpl, utpl - llm)};
}

// 8. loss identities
Outcome loss_identities(const Context&) {
  Rng rng(8);
  const Matrix<double> desc = init::normal<double>(rng, 6, 5, 0.7);
  const double same = relation_loss(Tensor<double>::constant(desc), desc).item();
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    Matrix<double> s(4, 5), y(4, 5);
    for (Index k = 0; k < s.size(); ++k) {
      s.data()[k] = rng.uniform(0.001, 0.999);
      y.data()[k] = rng.bernoulli(0.3);
    }
    double bce = 0;
    for (Index k = 0; k < s.size(); ++k) {
      const double p = s.data()[k], q = y.data()[k];
      bce -= q * std::log(p) + (1 - q) * std::log(1 - p);
    }
    bce /= static_cast<double>(s.size());
    worst = std::max(worst, std::abs(focal_loss(Tensor<double>::constant(s), y, 0.0, 0.5).item() - 0.5 * bce));
  }
  const double total = total_loss(Tensor<double>::scalar(0.1), Tensor<double>::scalar(0.002), RunConfig{}.relation_weight).item();
  const bool ok = std::abs(same) < 1e-12 && worst < 1e-8 && std::abs(total - 0.4) < 1e-12 && RunConfig{}.relation_weight == 150.0;
  return {ok, fmt("relation(self) %.1e, focal vs BCE/2 worst %.1e, 0.1 + 150*0.002 = %.12f", same, worst, total)};
}

// 9. inference rule against direct arithmetic
Outcome inference_rule(const Context&) {
  double worst = 0;
  int n = 0;
  for (double sh = 0.05; sh <= 1.0001; sh += 0.05)
    for (double so = 0.05; so <= 1.0001; so += 0.05)
      for (double sa = -6; sa <= 6.0001; sa += 0.5)
        for (double tau : {0.5, 1.0, 2.8, 4.0}) {
          const double direct = std::pow(sh * so, tau) * (1.0 / (1.0 + std::exp(-sa)));
          worst = std::max(worst, std::abs(inference_score(sh, so, sa, tau) - direct));
          ++n;
        }
  const RunConfig c;
  const bool ok = worst < 1e-9 && c.tau_train == 1.0 && c.tau_infer == 2.8;
  return {ok, std::to_string(n) + " grid points, worst error " + fmt("%.1e", worst) + fmt(", tau train %.1f / infer %.1f", c.tau_train, c.tau_infer)};
}

// 10. two identical 64-bit train+eval runs produce identical files
Outcome determinism(const Context& ctx) {
  RunConfig c = ctx.config;
  c.precision = 64;
  c.epochs = 3;
  std::string files[2][2];
  for (int r = 0; r < 2; ++r) {
    c.out_dir = (fs::path(ctx.work) / ("determinism_" + std::to_string(r))).string();
    const auto t = run_training<double>(c, ctx.uv);
    run_evaluation<double>(c, ctx.uv, t.checkpoint);
    files[r][0] = slurp((fs::path(c.out_dir) / "metrics.jsonl").string());
    files[r][1] = slurp((fs::path(c.out_dir) / "preds.jsonl").string());
  }
  const bool metrics = !files[0][0].empty() && files[0][0] == files[1][0];
  const bool preds = !files[0][1].empty() && files[0][1] == files[1][1];
  return {metrics && preds, std::string("metrics.jsonl ") + (metrics ? "identical" : "DIFFER") + ", preds.jsonl " +
                                (preds ? "identical" : "DIFFER") + " (" + std::to_string(files[0][1].size()) + " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <work-dir> [criterion ...]\n";
    return 2;
  }
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto want = [&](int k) { return only.empty() || only.count(k); };

  Context ctx;
  ctx.work = argv[1];
  fs::create_directories(ctx.work);
  ctx.data_dir = (fs::path(ctx.work) / "data").string();
  const auto t0 = Clock::now();
  try {
    note("generating the default dataset");
    generate_dataset(ctx.config, ctx.data_dir, true);
    ctx.uv = load_dataset(ctx.data_dir, SplitMode::UnseenVerb);
  } catch (const std::exception& e) {
    std::cerr << "dataset generation failed: " << e.what() << "\n";
    return 1;
  }

  std::map<int, std::pair<std::string, Outcome>> results;
  auto run = [&](int k, const std::string& name, const std::function<Outcome()>& fn) {
    if (!want(k)) return;
    note("criterion " + std::to_string(k) + ": " + name);
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    results[k] = {name, o};
    std::printf("criterion %2d  %-4s  %-26s %s\n", k, o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  };

  run(1, "gradient suite", [&] { return gradient_suite(ctx); });
  run(2, "zero-init identity", [&] { return zero_init_identity(ctx); });
  run(3, "frozen core", [&] { return frozen_core(ctx); });
  run(4, "oracle equivalence", [&] { return oracle_equivalence(ctx); });
  run(5, "split soundness", [&] { return split_soundness(ctx); });
  if (want(6) || want(7)) {
    LadderResult ladder;
    std::string error;
    try {
      ladder = run_ladder(ctx);
    } catch (const std::exception& e) {
      error = e.what();
    }
    auto guarded = [&](const std::function<Outcome()>& fn) {
      return error.empty() ? fn() : Outcome{false, "ladder failed: " + error};
    };
    run(6, "end-to-end learning", [&] { return guarded([&] { return end_to_end(ladder); }); });
    run(7, "ablation directionality", [&] { return guarded([&] { return ablation_direction(ladder); }); });
  }
  run(8, "loss identities", [&] { return loss_identities(ctx); });
  run(9, "inference rule", [&] { return inference_rule(ctx); });
  run(10, "determinism", [&] { return determinism(ctx); });

  int failed = 0;
  for (const auto& [k, r] : results) failed += !r.second.pass;
  std::printf("%zu criteria run, %d failed, %.0f s\n", results.size(), failed, seconds_since(t0));
  return failed ? 1 : 0;
}
