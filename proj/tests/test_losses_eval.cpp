#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "hoiprompt/config.hpp"
#include "hoiprompt/eval.hpp"
#include "hoiprompt/gradcheck.hpp"
#include "hoiprompt/losses.hpp"
#include "hoiprompt/nn.hpp"
#include "oracles.hpp"

using namespace hoi;
using Md = Matrix<double>;
using Td = Tensor<double>;

namespace {

double bce(double s, double t) { return -(t * std::log(s) + (1 - t) * std::log(1 - s)); }

// Straight KL over the off-diagonal entries, computed from the definition.
double kl_oracle(const Md& text, const Md& desc) {
  const Index c = text.rows();
  double total = 0;
  for (Index i = 0; i < c; ++i) {
    double zp = 0, zq = 0;
    for (Index j = 0; j < c; ++j) {
      if (j == i) continue;
      zp += std::exp(desc.row(i).dot(desc.row(j)));
      zq += std::exp(text.row(i).dot(text.row(j)));
    }
    for (Index j = 0; j < c; ++j) {
      if (j == i) continue;
      const double p = std::exp(desc.row(i).dot(desc.row(j))) / zp;
      const double q = std::exp(text.row(i).dot(text.row(j))) / zq;
      total += p * std::log(p / q);
    }
  }
  return total / static_cast<double>(c);
}

// Reference evaluator written from the protocol: per class, rank predictions by score, each
// takes the best still-free GT pair of its image when both boxes clear 0.5, AP is the area
// under the monotone precision envelope.
struct Reference {
  double full = 0, seen = 0, unseen = 0;
};

Reference reference_eval(std::vector<Prediction> preds, const std::vector<Scene>& scenes, int n_classes,
                         const std::vector<bool>& unseen) {
  std::stable_sort(preds.begin(), preds.end(), [](const Prediction& a, const Prediction& b) {
    return std::make_tuple(-a.score, a.scene, a.pair, a.hoi) < std::make_tuple(-b.score, b.scene, b.pair, b.hoi);
  });
  Reference r;
  int nf = 0, ns = 0, nu = 0;
  for (int c = 0; c < n_classes; ++c) {
    std::map<int, std::vector<std::pair<GroundTruthPair, bool>>> gt;
    int npos = 0;
    for (const auto& s : scenes)
      for (const auto& it : s.interactions)
        if (it.hoi == c) {
          gt[s.id].push_back({{it.human, it.object}, false});
          ++npos;
        }
    if (npos == 0) continue;
    std::vector<double> tp, fp;
    for (const auto& p : preds) {
      if (p.hoi != c) continue;
      double ovmax = 0.5;
      std::pair<GroundTruthPair, bool>* hit = nullptr;
      for (auto& g : gt[p.scene]) {
        if (g.second) continue;
        const double ov = std::min(iou(p.human, g.first.human), iou(p.object, g.first.object));
        if (ov > ovmax) {
          ovmax = ov;
          hit = &g;
        }
      }
      if (hit) hit->second = true;
      tp.push_back(hit ? 1 : 0);
      fp.push_back(hit ? 0 : 1);
    }
    for (std::size_t i = 1; i < tp.size(); ++i) {
      tp[i] += tp[i - 1];
      fp[i] += fp[i - 1];
    }
    std::vector<double> mrec = {0}, mpre = {0};
    for (std::size_t i = 0; i < tp.size(); ++i) {
      mrec.push_back(tp[i] / npos);
      mpre.push_back(tp[i] / (tp[i] + fp[i]));
    }
    mrec.push_back(1);
    mpre.push_back(0);
    for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
    double ap = 0;
    for (std::size_t i = 1; i < mrec.size(); ++i)
      if (mrec[i] != mrec[i - 1]) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
    r.full += ap;
    ++nf;
    if (unseen[static_cast<std::size_t>(c)]) {
      r.unseen += ap;
      ++nu;
    } else {
      r.seen += ap;
      ++ns;
    }
  }
  r.full = nf ? r.full / nf : 0;
  r.seen = ns ? r.seen / ns : 0;
  r.unseen = nu ? r.unseen / nu : 0;
  return r;
}

}  // namespace

TEST_CASE("focal loss") {
  Md one(1, 1), t1(1, 1);
  one << 0.6;
  t1 << 1;
  CHECK(std::abs(focal_loss(Td::constant(one), t1, 2.0, 0.25).item() - 0.25 * 0.16 * -std::log(0.6)) < 1e-12);
  CHECK(focal_loss(Td::constant(one), t1, 2.0, 0.25).item() == doctest::Approx(0.02043).epsilon(1e-3));

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Md s(3, 4), t(3, 4);
    for (Index k = 0; k < s.size(); ++k) {
      s.data()[k] = rng.uniform(0.01, 0.99);
      t.data()[k] = rng.bernoulli(0.3) ? 1 : 0;
    }
    double expected = 0;
    for (Index k = 0; k < s.size(); ++k) expected += bce(s.data()[k], t.data()[k]);
    expected /= static_cast<double>(s.size());
    CHECK(std::abs(focal_loss(Td::constant(s), t, 0.0, 0.5).item() - 0.5 * expected) < 1e-8);
    Td sp = Td::leaf(s, true);
    CHECK(gradcheck<double>([&] { return focal_loss(sp, t, 2.0, 0.25); }, sp).rel_error < 1e-4);
  }

  Md perfect(1, 2), pt(1, 2);
  perfect << 1.0 - 1e-12, 1e-12;
  pt << 1, 0;
  int clamped = 0;
  CHECK(focal_loss(Td::constant(perfect), pt, 2.0, 0.25, &clamped).item() < 1e-12);
  CHECK(clamped == 2);
  CHECK_THROWS_AS(focal_loss(Td::constant(perfect), Md(Md::Zero(2, 2)), 2.0, 0.25), DimensionError);
}

TEST_CASE("relation loss") {
  Rng rng(5);
  const Md desc = init::normal<double>(rng, 5, 6, 0.6);
  CHECK(std::abs(relation_loss(Td::constant(desc), desc).item()) < 1e-12);

  for (int trial = 0; trial < 100; ++trial) {
    const Md text = init::normal<double>(rng, 5, 6, 0.6);
    const double l = relation_loss(Td::constant(text), desc).item();
    CHECK(l >= -1e-15);
    CHECK(std::abs(l - kl_oracle(text, desc)) < 1e-10);
  }

  // 3-class hand instance
  Md t3(3, 2), d3(3, 2);
  t3 << 1, 0, 0, 1, 0.6, 0.8;
  d3 << 1, 0, 0.8, 0.6, 0, 1;
  double expected = 0;
  {
    const double S[3][3] = {{1, 0.8, 0}, {0.8, 1, 0.6}, {0, 0.6, 1}};     // description similarities
    const double T[3][3] = {{1, 0, 0.6}, {0, 1, 0.8}, {0.6, 0.8, 1}};     // text similarities
    for (int i = 0; i < 3; ++i) {
      const int a = (i + 1) % 3, b = (i + 2) % 3;
      const double pa = std::exp(S[i][a]) / (std::exp(S[i][a]) + std::exp(S[i][b]));
      const double qa = std::exp(T[i][a]) / (std::exp(T[i][a]) + std::exp(T[i][b]));
      expected += pa * std::log(pa / qa) + (1 - pa) * std::log((1 - pa) / (1 - qa));
    }
    expected /= 3;
  }
  CHECK(std::abs(relation_loss(Td::constant(t3), d3).item() - expected) < 1e-6);

  Td tp = Td::leaf(init::normal<double>(rng, 5, 6, 0.6), true);
  CHECK(gradcheck<double>([&] { return relation_loss(tp, desc); }, tp).rel_error < 1e-4);
  CHECK(relation_loss(Td::constant(Md::Ones(1, 3)), Md(Md::Ones(1, 3))).item() == 0.0);
  CHECK_THROWS_AS(relation_loss(tp, Md(Md::Zero(4, 6))), DimensionError);
}

TEST_CASE("training loss composition") {
  const Td f = Td::scalar(0.1), r = Td::scalar(0.002);
  CHECK(std::abs(total_loss(f, r, 150.0).item() - 0.4) < 1e-12);
  CHECK(total_loss(f, r, 0.0).item() == 0.1);
  CHECK_THROWS_AS(total_loss(f, r, -1.0), ConfigError);
  CHECK(RunConfig{}.relation_weight == 150.0);
}

TEST_CASE("iou") {
  const Box a{0, 0, 1, 1};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, Box{2, 2, 3, 3}) == 0.0);
  CHECK(iou(a, Box{0.5, 0, 1.5, 1}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(iou(a, Box{1, 1, 0, 0}), DimensionError);
}

TEST_CASE("matching") {
  const GroundTruthPair g{{0, 0, 2, 2}, {1, 1, 3, 3}};
  Prediction exact;
  exact.human = g.human;
  exact.object = g.object;
  CHECK(match_predictions({exact}, {g}) == std::vector<bool>{true});
  CHECK(match_predictions({exact, exact}, {g}) == std::vector<bool>{true, false});

  Rng rng(29);
  int total_tp = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto [preds, gts] = oracle::matching_instance(rng);
    const auto flags = match_predictions(preds, gts);
    REQUIRE(flags == oracle::enumerate_matching(preds, gts));
    total_tp += static_cast<int>(std::count(flags.begin(), flags.end(), true));
  }
  CHECK(total_tp > 500);  // the instances are not trivially empty
}

TEST_CASE("average precision") {
  CHECK(average_precision({true, false, true}, 2) == doctest::Approx((1.0 + 2.0 / 3.0) / 2).epsilon(1e-12));
  CHECK(std::abs(average_precision({true, false, true}, 2) - 0.8333) < 1e-4);
  CHECK(average_precision({true, true, true}, 3) == 1.0);
  CHECK(average_precision({false, false}, 3) == 0.0);
  CHECK(average_precision({}, 3) == 0.0);
  CHECK_THROWS_AS(average_precision({true}, 0), ContractError);

  Rng rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const auto [tp, n_gt] = oracle::ap_instance(rng);
    CHECK(std::abs(average_precision(tp, n_gt) - oracle::hand_ap(tp, n_gt)) < 1e-6);
  }
}

TEST_CASE("evaluate against the reference evaluator") {
  WorldConfig wc;
  wc.n_verbs = 4;
  wc.n_objects = 3;
  wc.n_hoi = 8;
  wc.n_train = 30;
  wc.n_test = 20;
  const World w = generate_world(wc);
  const SplitSpec split = make_split(w, SplitMode::UnseenVerb, 0.25, 1);
  std::vector<bool> unseen(w.classes.size());
  for (std::size_t c = 0; c < unseen.size(); ++c) unseen[c] = split.is_unseen(static_cast<int>(c));
  std::vector<Scene> test;
  for (const Scene* s : w.test_scenes()) test.push_back(*s);

  // perfect predictions straight from the ground truth
  std::vector<Prediction> perfect;
  for (const auto& s : test)
    for (const auto& it : s.interactions) perfect.push_back({s.id, 0, it.human, it.object, it.hoi, 1.0});
  const EvalReport pr = evaluate(perfect, w, split);
  CHECK(pr.map_full == 1.0);
  CHECK(pr.map_seen == 1.0);
  CHECK(pr.map_unseen == 1.0);
  const EvalReport empty = evaluate({}, w, split);
  CHECK(empty.map_full == 0.0);
  CHECK(empty.map_unseen == 0.0);

  Rng rng(37);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<Prediction> preds;
    for (const auto& s : test) {
      int pair = 0;
      for (const auto& it : s.interactions) {
        for (int k = 0; k < 3; ++k) {
          Prediction p{s.id, pair++, oracle::jitter(rng, it.human, 0.4), oracle::jitter(rng, it.object, 0.4), it.hoi, rng.uniform()};
          if (rng.bernoulli(0.3)) p.hoi = rng.integer(0, wc.n_hoi - 1);
          if (rng.bernoulli(0.1)) p.score = 0.5;  // ties
          if (p.human.well_formed() && p.object.well_formed()) preds.push_back(p);
        }
      }
    }
    const EvalReport r = evaluate(preds, w, split);
    const Reference ref = reference_eval(preds, test, wc.n_hoi, unseen);
    CHECK(std::abs(r.map_full - ref.full) < 1e-6);
    CHECK(std::abs(r.map_seen - ref.seen) < 1e-6);
    CHECK(std::abs(r.map_unseen - ref.unseen) < 1e-6);
  }
}

TEST_CASE("report schema") {
  EvalReport r;
  r.classes.push_back({0, true, 2, 0.5});
  const std::string j = r.to_json();
  for (const char* key : {"\"map_full\"", "\"map_seen\"", "\"map_unseen\"", "\"per_class\""}) CHECK(j.find(key) != std::string::npos);
}
