#include "hoiprompt/config.hpp"

#include <functional>
#include <sstream>

#include "hoiprompt/tensor.hpp"

namespace hoi {

Toggles ablation_row(int row) {
  if (row < 0 || row >= kAblationRows) throw ConfigError("ablation row out of range: " + std::to_string(row));
  Toggles t;
  t.intra_fusion = row >= 1;
  t.visual_adapter = row >= 2;
  t.llm_guide = row >= 3;
  t.utpl = row >= 4;
  t.inter_fusion = row >= 5;
  t.vlm_guide = row >= 6;
  return t;
}

const char* ablation_label(int row) {
  static const char* labels[] = {"baseline", "+intra", "+adapter", "+llm", "+utpl", "+inter", "+vlm"};
  return labels[row];
}

void set_toggle(Toggles& t, const std::string& name, bool on) {
  if (name == "intra_fusion") t.intra_fusion = on;
  else if (name == "inter_fusion") t.inter_fusion = on;
  else if (name == "visual_adapter") t.visual_adapter = on;
  else if (name == "llm_guide") t.llm_guide = on;
  else if (name == "utpl") t.utpl = on;
  else if (name == "vlm_guide") t.vlm_guide = on;
  else throw ConfigError("unknown toggle '" + name + "'");
}

bool get_toggle(const Toggles& t, const std::string& name) {
  if (name == "intra_fusion") return t.intra_fusion;
  if (name == "inter_fusion") return t.inter_fusion;
  if (name == "visual_adapter") return t.visual_adapter;
  if (name == "llm_guide") return t.llm_guide;
  if (name == "utpl") return t.utpl;
  if (name == "vlm_guide") return t.vlm_guide;
  throw ConfigError("unknown toggle '" + name + "'");
}

namespace {

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
  bool model = true;  // participates in model_hash
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    T v;
    if constexpr (std::is_same_v<T, double>) v = std::stod(text, &used);
    else if constexpr (std::is_same_v<T, std::uint64_t>) v = std::stoull(text, &used);
    else v = static_cast<T>(std::stoll(text, &used));
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad value for '" + key + "': '" + text + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "on" || text == "true" || text == "1") return true;
  if (text == "off" || text == "false" || text == "0") return false;
  throw ConfigError("bad value for '" + key + "': '" + text + "' (expected on/off)");
}

#define HOI_INT(name, member, model_field)                                                                  \
  {name, {[](RunConfig& c, const std::string& v) { c.member = parse_number<int>(name, v); },             \
          [](const RunConfig& c) { return std::to_string(c.member); }, model_field}}
#define HOI_DOUBLE(name, member, model_field)                                                               \
  {name, {[](RunConfig& c, const std::string& v) { c.member = parse_number<double>(name, v); },          \
          [](const RunConfig& c) { return fmt(c.member); }, model_field}}
#define HOI_BOOL(name, member)                                                                              \
  {name, {[](RunConfig& c, const std::string& v) { c.member = parse_bool(name, v); },                    \
          [](const RunConfig& c) { return std::string(c.member ? "on" : "off"); }, true}}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"data_dir", {[](RunConfig& c, const std::string& v) { c.data_dir = v; }, [](const RunConfig& c) { return c.data_dir; }, false}},
      {"out_dir", {[](RunConfig& c, const std::string& v) { c.out_dir = v; }, [](const RunConfig& c) { return c.out_dir; }, false}},
      {"checkpoint", {[](RunConfig& c, const std::string& v) { c.checkpoint = v; }, [](const RunConfig& c) { return c.checkpoint; }, false}},
      {"world_seed", {[](RunConfig& c, const std::string& v) { c.world.seed = parse_number<std::uint64_t>("world_seed", v); },
                      [](const RunConfig& c) { return std::to_string(c.world.seed); }, true}},
      HOI_INT("n_verbs", world.n_verbs, true),
      HOI_INT("n_objects", world.n_objects, true),
      HOI_INT("n_hoi", world.n_hoi, true),
      HOI_INT("n_train", world.n_train, true),
      HOI_INT("n_test", world.n_test, true),
      HOI_INT("patch_grid", world.patch_grid, true),
      HOI_INT("patch_pixels", world.patch_pixels, true),
      HOI_DOUBLE("zipf_exponent", world.zipf_exponent, true),
      HOI_DOUBLE("detector_noise", world.detector_noise, true),
      HOI_DOUBLE("second_pair_prob", world.second_pair_prob, true),
      HOI_DOUBLE("distractor_prob", world.distractor_prob, true),
      {"mode", {[](RunConfig& c, const std::string& v) {
                  auto m = parse_split_mode(v);
                  if (!m) throw ConfigError("bad value for 'mode': '" + v + "' (expected uv, uo, rfuc or nfuc)");
                  c.mode = *m;
                },
                [](const RunConfig& c) { return to_string(c.mode); }, true}},
      HOI_DOUBLE("unseen_fraction", unseen_fraction, true),
      HOI_INT("disparity_sentences", disparity_sentences, true),
      HOI_DOUBLE("guidance_verb_weight", guidance_verb_weight, true),
      HOI_DOUBLE("guidance_object_weight", guidance_object_weight, true),
      HOI_DOUBLE("guidance_noise", guidance_noise, true),
      HOI_INT("d_v", d_v, true),
      HOI_INT("d_t", d_t, true),
      HOI_INT("d_a", d_a, true),
      HOI_INT("layers", layers, true),
      HOI_INT("visual_heads", visual_heads, true),
      HOI_INT("text_heads", text_heads, true),
      HOI_INT("mlp_ratio", mlp_ratio, true),
      HOI_DOUBLE("residual_gain", residual_gain, true),
      HOI_INT("pretrain_steps", pretrain_steps, true),
      HOI_INT("pretrain_scenes_per_class", pretrain_scenes_per_class, true),
      HOI_DOUBLE("pretrain_consistency", pretrain_consistency, true),
      HOI_INT("prompt_tokens", prompt_tokens, true),
      HOI_INT("prompt_depth", prompt_depth, true),
      HOI_INT("adapter_rank", adapter_rank, true),
      HOI_INT("intra_hidden", intra_hidden, true),
      HOI_INT("inter_heads", inter_heads, true),
      HOI_DOUBLE("theta", theta, true),
      HOI_DOUBLE("logit_scale", logit_scale, true),
      HOI_BOOL("sigmoid_on_logits", sigmoid_on_logits),
      HOI_DOUBLE("focal_gamma", focal_gamma, true),
      HOI_DOUBLE("focal_alpha", focal_alpha, true),
      HOI_DOUBLE("relation_weight", relation_weight, true),
      HOI_DOUBLE("tau_train", tau_train, true),
      HOI_DOUBLE("tau_infer", tau_infer, false),
      HOI_DOUBLE("lr", lr, true),
      HOI_DOUBLE("weight_decay", weight_decay, true),
      HOI_INT("batch_size", batch_size, true),
      HOI_INT("epochs", epochs, false),
      HOI_INT("warmup_steps", warmup_steps, true),
      HOI_INT("patience", patience, false),
      HOI_INT("validation_scenes", validation_scenes, false),
      {"seed", {[](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); },
                [](const RunConfig& c) { return std::to_string(c.seed); }, true}},
      HOI_INT("precision", precision, true),
      HOI_BOOL("intra_fusion", toggles.intra_fusion),
      HOI_BOOL("inter_fusion", toggles.inter_fusion),
      HOI_BOOL("visual_adapter", toggles.visual_adapter),
      HOI_BOOL("llm_guide", toggles.llm_guide),
      HOI_BOOL("utpl", toggles.utpl),
      HOI_BOOL("vlm_guide", toggles.vlm_guide),
  };
  return table;
}

#undef HOI_INT
#undef HOI_DOUBLE
#undef HOI_BOOL

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& table = fields();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(*this, value);
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + "=" + field.get(*this) + "\n";
  return out;
}

std::string RunConfig::model_hash() const {
  Fnv1a h;
  for (const auto& [key, field] : fields()) {
    if (!field.model) continue;
    h.update(key + "=" + field.get(*this) + "\n");
  }
  return hex64(h.digest());
}

void RunConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(d_v > 0 && d_t > 0 && d_a > 0, "dimensions must be positive");
  need(layers >= 1, "layers must be >= 1");
  need(prompt_depth >= 0 && prompt_depth <= layers,
       "prompt_depth N=" + std::to_string(prompt_depth) + " must lie in [0, layers=" + std::to_string(layers) + "]");
  need(prompt_tokens >= 1, "prompt_tokens must be >= 1");
  need(d_v % visual_heads == 0, "d_v not divisible by visual_heads");
  need(d_t % text_heads == 0, "d_t not divisible by text_heads");
  need(d_t % 4 == 0 && d_v % 4 == 0 && d_a % 4 == 0, "d_v, d_t and d_a must be divisible by 4 (guidance bottleneck)");
  need((d_a / 4) % inter_heads == 0, "d_a/4 not divisible by inter_heads");
  need(theta >= 0 && theta < 1, "theta must lie in [0, 1)");
  need(tau_train > 0 && tau_infer > 0, "tau must be positive");
  need(relation_weight >= 0, "relation_weight must be >= 0");
  need(focal_gamma >= 0, "focal_gamma must be >= 0");
  need(lr > 0, "lr must be positive");
  need(batch_size >= 1, "batch_size must be >= 1");
  need(epochs >= 0, "epochs must be >= 0");
  need(precision == 32 || precision == 64, "precision must be 32 or 64");
  need(disparity_sentences >= 1, "disparity_sentences must be >= 1");
  need(guidance_noise >= 0, "guidance_noise must be >= 0");
  need(pretrain_consistency >= 0, "pretrain_consistency must be >= 0");
  need(patience >= 0, "patience must be >= 0");
  need(validation_scenes >= 0, "validation_scenes must be >= 0");
  need(patience == 0 || validation_scenes > 0, "early stopping needs validation_scenes > 0");
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::istringstream in(read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

}  // namespace hoi
