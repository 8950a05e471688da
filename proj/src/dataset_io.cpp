#include "hoiprompt/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <map>
#include <sstream>

#include <json.hpp>

namespace hoi {

static_assert(std::endian::native == std::endian::little, "pixel blobs are stored little-endian");

using json = nlohmann::json;

namespace {

constexpr const char* kSceneFormat = "hoiprompt-scenes/1";
constexpr const char* kGuidanceFormat = "hoiprompt-guidance/1";
constexpr const char* kMetaFormat = "hoiprompt-world/1";

json box_json(const Box& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

Box box_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()}; }

json scene_json(const Scene& s) {
  json j;
  j["id"] = s.id;
  j["train"] = s.train;
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(s.pixels.data());
  j["pixels"] = base64_encode({bytes, s.pixels.size() * sizeof(float)});
  json ents = json::array();
  for (const auto& e : s.entities) ents.push_back({{"box", box_json(e.box)}, {"category", e.category}});
  j["entities"] = ents;
  json inter = json::array();
  for (const auto& it : s.interactions)
    inter.push_back({{"human", box_json(it.human)}, {"object", box_json(it.object)}, {"hoi", it.hoi}});
  j["interactions"] = inter;
  json dets = json::array();
  for (const auto& d : s.detections)
    dets.push_back({{"box", box_json(d.box)}, {"category", d.category}, {"score", d.score}});
  j["detections"] = dets;
  return j;
}

Scene scene_from(const json& j, std::size_t pixel_count) {
  Scene s;
  s.id = j.at("id").get<int>();
  s.train = j.at("train").get<bool>();
  const auto bytes = base64_decode(j.at("pixels").get<std::string>());
  if (bytes.size() != pixel_count * sizeof(float)) {
    throw DatasetError("scene " + std::to_string(s.id) + ": pixel blob has " + std::to_string(bytes.size()) +
                       " bytes, expected " + std::to_string(pixel_count * sizeof(float)));
  }
  s.pixels.resize(pixel_count);
  std::memcpy(s.pixels.data(), bytes.data(), bytes.size());
  for (const auto& e : j.at("entities")) s.entities.push_back({box_from(e.at("box")), e.at("category").get<int>()});
  for (const auto& it : j.at("interactions"))
    s.interactions.push_back({box_from(it.at("human")), box_from(it.at("object")), it.at("hoi").get<int>()});
  for (const auto& d : j.at("detections"))
    s.detections.push_back({box_from(d.at("box")), d.at("category").get<int>(), d.at("score").get<double>()});
  return s;
}

std::string digest(const std::string& text) { return hex64(fnv1a(text)); }

// Splits "header\nrecord\nrecord\n..." and verifies the header checksum over the records.
std::vector<json> read_jsonl(const std::string& path, const char* format, json& header) {
  const std::string text = read_file(path);
  const auto first = text.find('\n');
  if (first == std::string::npos) throw DatasetError(path + ": missing header line");
  header = json::parse(text.substr(0, first));
  if (header.value("format", "") != format) throw DatasetError(path + ": unexpected format '" + header.value("format", "") + "'");
  const std::string body = text.substr(first + 1);
  const std::string actual = digest(body);
  const std::string expected = header.value("checksum", "");
  if (actual != expected) throw ChecksumError(path, expected, actual);
  std::vector<json> records;
  std::istringstream in(body);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) records.push_back(json::parse(line));
  if (header.contains("count") && header["count"].get<std::size_t>() != records.size()) {
    throw DatasetError(path + ": header count " + header["count"].dump() + " but " + std::to_string(records.size()) + " records");
  }
  return records;
}

std::string write_jsonl(const std::string& path, json header, const std::vector<json>& records) {
  std::string body;
  for (const auto& r : records) body += r.dump() + "\n";
  const std::string sum = digest(body);
  header["count"] = records.size();
  header["checksum"] = sum;
  write_file_atomic(path, header.dump() + "\n" + body);
  return sum;
}

std::map<std::string, std::string> parse_meta(const std::string& text, std::string& unsigned_part) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DatasetError("world.meta: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq);
    kv[key] = line.substr(eq + 1);
    if (key != "checksum") unsigned_part += line + "\n";
  }
  return kv;
}

}  // namespace

std::string save_world(const std::string& root, const World& world) {
  std::filesystem::create_directories(root);
  std::vector<json> records;
  records.reserve(world.scenes.size());
  for (const auto& s : world.scenes) records.push_back(scene_json(s));
  const std::string scenes_sum = write_jsonl(root + "/scenes.jsonl", json{{"format", kSceneFormat}}, records);

  const auto& c = world.config;
  std::ostringstream meta;
  meta.precision(17);
  meta << "format=" << kMetaFormat << "\n"
       << "seed=" << c.seed << "\n"
       << "n_verbs=" << c.n_verbs << "\n"
       << "n_objects=" << c.n_objects << "\n"
       << "n_hoi=" << c.n_hoi << "\n"
       << "n_train=" << c.n_train << "\n"
       << "n_test=" << c.n_test << "\n"
       << "patch_grid=" << c.patch_grid << "\n"
       << "patch_pixels=" << c.patch_pixels << "\n"
       << "zipf_exponent=" << c.zipf_exponent << "\n"
       << "detector_noise=" << c.detector_noise << "\n"
       << "second_pair_prob=" << c.second_pair_prob << "\n"
       << "distractor_prob=" << c.distractor_prob << "\n";
  for (const auto& v : world.verbs) meta << "verb." << v.id << "=" << v.relation << "," << v.gesture << "\n";
  for (const auto& h : world.classes) meta << "class." << h.id << "=" << h.verb << "," << h.object << "," << h.train_count << "\n";
  meta << "scenes_checksum=" << scenes_sum << "\n";
  const std::string body = meta.str();
  const std::string sum = digest(body);
  write_file_atomic(root + "/world.meta", body + "checksum=" + sum + "\n");
  return sum;
}

std::string world_checksum(const std::string& root) {
  std::string unsigned_part;
  const auto kv = parse_meta(read_file(root + "/world.meta"), unsigned_part);
  const std::string actual = digest(unsigned_part);
  const auto it = kv.find("checksum");
  const std::string expected = it == kv.end() ? "" : it->second;
  if (actual != expected) throw ChecksumError(root + "/world.meta", expected, actual);
  return expected;
}

World load_world(const std::string& root) {
  world_checksum(root);
  std::string unused;
  const auto kv = parse_meta(read_file(root + "/world.meta"), unused);
  auto get = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw DatasetError("world.meta: missing key '" + key + "'");
    return it->second;
  };
  if (get("format") != kMetaFormat) throw DatasetError("world.meta: unexpected format '" + get("format") + "'");
  World w;
  auto& c = w.config;
  c.seed = std::stoull(get("seed"));
  c.n_verbs = std::stoi(get("n_verbs"));
  c.n_objects = std::stoi(get("n_objects"));
  c.n_hoi = std::stoi(get("n_hoi"));
  c.n_train = std::stoi(get("n_train"));
  c.n_test = std::stoi(get("n_test"));
  c.patch_grid = std::stoi(get("patch_grid"));
  c.patch_pixels = std::stoi(get("patch_pixels"));
  c.zipf_exponent = std::stod(get("zipf_exponent"));
  c.detector_noise = std::stod(get("detector_noise"));
  c.second_pair_prob = std::stod(get("second_pair_prob"));
  c.distractor_prob = std::stod(get("distractor_prob"));
  for (int v = 0; v < c.n_verbs; ++v) {
    VerbSpec spec;
    spec.id = v;
    std::sscanf(get("verb." + std::to_string(v)).c_str(), "%d,%d", &spec.relation, &spec.gesture);
    w.verbs.push_back(spec);
  }
  for (int h = 0; h < c.n_hoi; ++h) {
    HoiCategory cat;
    cat.id = h;
    std::sscanf(get("class." + std::to_string(h)).c_str(), "%d,%d,%d", &cat.verb, &cat.object, &cat.train_count);
    w.classes.push_back(cat);
  }
  json header;
  const auto records = read_jsonl(root + "/scenes.jsonl", kSceneFormat, header);
  if (header.value("checksum", "") != get("scenes_checksum")) {
    throw ChecksumError(root + "/scenes.jsonl", get("scenes_checksum"), header.value("checksum", ""));
  }
  const auto pixel_count = static_cast<std::size_t>(c.image_size() * c.image_size() * 3);
  for (const auto& r : records) w.scenes.push_back(scene_from(r, pixel_count));
  if (static_cast<int>(w.scenes.size()) != c.n_train + c.n_test) throw DatasetError("scenes.jsonl: scene count does not match world.meta");
  return w;
}

std::string save_split(const std::string& path, const SplitSpec& split) {
  json j{{"mode", to_string(split.mode)}, {"seen", split.seen}, {"unseen", split.unseen}};
  const std::string sum = digest(j.dump());
  j["checksum"] = sum;
  write_file_atomic(path, j.dump(2) + "\n");
  return sum;
}

SplitSpec load_split(const std::string& path) {
  json j = json::parse(read_file(path));
  const std::string expected = j.value("checksum", "");
  j.erase("checksum");
  const std::string actual = digest(j.dump());
  if (actual != expected) throw ChecksumError(path, expected, actual);
  SplitSpec s;
  const auto mode = parse_split_mode(j.at("mode").get<std::string>());
  if (!mode) throw DatasetError(path + ": unknown split mode");
  s.mode = *mode;
  s.seen = j.at("seen").get<std::vector<int>>();
  s.unseen = j.at("unseen").get<std::vector<int>>();
  return s;
}

std::string save_guidance(const std::string& path, const GuidanceEmbeddings& g) {
  std::vector<json> records;
  for (int c = 0; c < g.classes(); ++c) {
    json r;
    r["id"] = c;
    const auto row = g.descriptions.row(c);
    r["description"] = std::vector<double>(row.data(), row.data() + row.size());
    json disp = json::array();
    const auto& d = g.disparities[static_cast<std::size_t>(c)];
    for (Index k = 0; k < d.rows(); ++k) disp.push_back(std::vector<double>(d.row(k).data(), d.row(k).data() + d.cols()));
    r["disparity"] = disp;
    r["related_seen"] = g.related_seen[static_cast<std::size_t>(c)];
    records.push_back(r);
  }
  return write_jsonl(path, json{{"format", kGuidanceFormat}, {"width", g.width()}}, records);
}

GuidanceEmbeddings load_guidance(const std::string& path) {
  json header;
  const auto records = read_jsonl(path, kGuidanceFormat, header);
  const int width = header.at("width").get<int>();
  GuidanceEmbeddings g;
  g.descriptions.resize(static_cast<Index>(records.size()), width);
  for (const auto& r : records) {
    const int id = r.at("id").get<int>();
    if (id < 0 || id >= static_cast<int>(records.size())) throw DatasetError(path + ": class id out of range");
    const auto desc = r.at("description").get<std::vector<double>>();
    if (static_cast<int>(desc.size()) != width) throw DatasetError(path + ": description width mismatch for class " + std::to_string(id));
    for (int j = 0; j < width; ++j) g.descriptions(id, j) = desc[static_cast<std::size_t>(j)];
  }
  g.disparities.assign(records.size(), Matrix<double>());
  g.related_seen.assign(records.size(), -1);
  for (const auto& r : records) {
    const auto id = static_cast<std::size_t>(r.at("id").get<int>());
    const auto rows = r.at("disparity").get<std::vector<std::vector<double>>>();
    Matrix<double> d(static_cast<Index>(rows.size()), width);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (static_cast<int>(rows[k].size()) != width) throw DatasetError(path + ": disparity width mismatch for class " + std::to_string(id));
      for (int j = 0; j < width; ++j) d(static_cast<Index>(k), j) = rows[k][static_cast<std::size_t>(j)];
    }
    g.disparities[id] = std::move(d);
    g.related_seen[id] = r.at("related_seen").get<int>();
  }
  return g;
}

std::string split_dir(const std::string& root, SplitMode mode) { return root + "/" + to_string(mode); }

}  // namespace hoi
