#include "wharm/detect.hpp"

#include <sstream>

namespace wharm {

bool in_polyhedron(const Classifier& c, std::span<const double> pixels) {
  if (c.kind() != FeatureKind::Holomorphic) {
    throw DetectionError("the analytic polyhedron is defined for holomorphic classifiers only");
  }
  if (!c.has_zero_class()) throw DetectionError("polyhedron test needs the zero-class attached");
  return predict(c, pixels) == c.num_labels();
}

DetectionReport DetectionReport::from_counts(const DetectionCounts& counts) {
  DetectionReport r;
  r.counts = counts;
  const std::size_t flagged = counts.tp + counts.fp;
  const std::size_t positives = counts.tp + counts.fn;
  if (flagged == 0) {
    r.degenerate = true;
    r.precision = 0.0;
  } else {
    r.precision = double(counts.tp) / double(flagged);
  }
  r.recall = positives == 0 ? 0.0 : double(counts.tp) / double(positives);
  r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

DetectionReport detect_run(const Classifier& c, const LabeledSet& benign, const AttackConfig& cfg) {
  if (benign.empty()) throw DetectionError("detection needs at least one benign sample");
  DetectionCounts counts;
  std::size_t used = 0;
  for (std::size_t i = 0; i < benign.size(); ++i) {
    if (cfg.target && benign.label(i) == *cfg.target) continue;
    ++used;
    if (in_polyhedron(c, benign.image(i))) {
      ++counts.fp;
    } else {
      ++counts.tn;
    }
    const auto adv = pgd(c, benign.image(i), benign.label(i), cfg, i);
    if (in_polyhedron(c, adv)) {
      ++counts.tp;
    } else {
      ++counts.fn;
    }
  }
  if (used == 0) throw DetectionError("every benign sample already carries the attack target label");
  return DetectionReport::from_counts(counts);
}

std::string describe(const AttackConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "radius=" << cfg.radius << ";steps=" << cfg.steps << ";step_size=" << cfg.step_size
     << ";target=" << (cfg.target ? std::to_string(*cfg.target) : std::string("none"))
     << ";aware_extra=" << (cfg.aware_extra ? 1 : 0) << ";seed=" << cfg.seed;
  return os.str();
}

LabeledSet adversarial_inside(const Classifier& c, const LabeledSet& benign, const AttackConfig& cfg) {
  LabeledSet adv(benign.image_rows(), benign.image_cols());
  for (std::size_t i = 0; i < benign.size(); ++i) {
    if (cfg.target && benign.label(i) == *cfg.target) continue;
    const auto x = pgd(c, benign.image(i), benign.label(i), cfg, i);
    if (in_polyhedron(c, x)) adv.push_back(x, benign.label(i), Origin::Adversarial);
  }
  adv.provenance = benign.provenance;
  adv.provenance["attack"] = describe(cfg);
  adv.provenance["attack_seed"] = std::to_string(cfg.seed);
  adv.provenance["attacked_from"] = std::to_string(benign.size());
  return adv;
}

Partition build_partition(const Classifier& c, const LabeledSet& benign, const AttackConfig& cfg) {
  Partition p;
  p.s_nat = benign.with_origin(Origin::Natural);
  p.s_adv = adversarial_inside(c, benign, cfg);
  if (p.s_adv.empty()) throw DetectionError("no adversarial example landed inside the polyhedron");
  p.s_union = p.s_nat;
  p.s_union.append(p.s_adv);
  p.s_union.provenance["attack"] = describe(cfg);
  return p;
}

void persist_partition(const Partition& p, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  persist_set(p.s_nat, dir / "s_nat.set");
  persist_set(p.s_adv, dir / "s_adv.set");
}

Partition load_partition(const std::filesystem::path& dir) {
  Partition p;
  p.s_nat = load_set(dir / "s_nat.set");
  p.s_adv = load_set(dir / "s_adv.set");
  p.s_union = p.s_nat;
  p.s_union.append(p.s_adv);
  p.s_union.provenance["attack"] = p.s_adv.provenance.count("attack") ? p.s_adv.provenance.at("attack") : "";
  return p;
}

}  // namespace wharm
