#include <algorithm>
#include <fstream>
#include <json.hpp>

#include "vnn/dataset.hpp"
#include "vnn/io.hpp"

namespace vnn {
namespace {

using nlohmann::json;

template <class T>
T field(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw LoadError(ctx + "missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw LoadError(ctx + "field '" + key + "': " + e.what());
  }
}

}  // namespace

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open manifest '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }
  DatasetManifest m;
  m.classes = field<std::vector<std::string>>(j, "classes", "");
  m.frames_per_clip = field<std::size_t>(j, "frames_per_clip", "");
  m.streams = field<std::vector<std::string>>(j, "streams", "");
  if (j.contains("height")) m.height = field<std::size_t>(j, "height", "");
  if (j.contains("width")) m.width = field<std::size_t>(j, "width", "");
  if (m.classes.empty()) throw LoadError("manifest lists no classes");
  for (const auto& s : m.streams) {
    if (s != "rgb" && s != "flow") throw LoadError("unknown stream '" + s + "'");
  }
  if (!j.contains("clips") || !j["clips"].is_array()) throw LoadError("manifest has no 'clips' array");
  for (const auto& c : j["clips"]) {
    ManifestClip clip;
    clip.id = field<std::string>(c, "id", "clip: ");
    const std::string ctx = "clip '" + clip.id + "': ";
    clip.label = field<std::size_t>(c, "label", ctx);
    clip.video = c.contains("video") ? field<std::string>(c, "video", ctx) : clip.id;
    clip.files = field<std::map<std::string, std::string>>(c, "files", ctx);
    m.clips.push_back(std::move(clip));
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  json j;
  j["classes"] = m.classes;
  j["frames_per_clip"] = m.frames_per_clip;
  if (m.height) j["height"] = *m.height;
  if (m.width) j["width"] = *m.width;
  j["streams"] = m.streams;
  j["clips"] = json::array();
  for (const auto& c : m.clips) {
    json jc;
    jc["id"] = c.id;
    jc["label"] = c.label;
    if (c.video != c.id) jc["video"] = c.video;
    jc["files"] = c.files;
    j["clips"].push_back(std::move(jc));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write manifest '" + path.string() + "'");
  out << j.dump(1) << "\n";
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  const DatasetManifest m = read_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  Dataset ds;
  ds.classes = m.classes;
  ds.frames_per_clip = m.frames_per_clip;
  ds.streams = m.streams;
  if (std::find(m.streams.begin(), m.streams.end(), "rgb") == m.streams.end()) {
    throw LoadError("manifest must provide the rgb stream");
  }
  std::map<std::string, Shape> stream_shapes;
  for (const auto& c : m.clips) {
    if (c.label >= m.classes.size()) {
      throw LoadError("label " + std::to_string(c.label) + " >= class count " + std::to_string(m.classes.size()),
                      c.id);
    }
    Sample s;
    s.id = c.id;
    s.video = c.video;
    s.label = c.label;
    for (const auto& stream : m.streams) {
      const auto it = c.files.find(stream);
      if (it == c.files.end()) throw LoadError("no file for stream '" + stream + "'", c.id);
      const auto file = base / it->second;
      if (!std::filesystem::exists(file)) throw LoadError("missing file '" + file.string() + "'", c.id);
      Tensor t;
      try {
        t = load_tensor(file);
      } catch (const Error& e) {
        throw LoadError(e.what(), c.id);
      }
      if (t.rank() == 3) t = Tensor({1, t.extent(0), t.extent(1), t.extent(2)}, {t.data().begin(), t.data().end()});
      if (t.rank() != 4) throw LoadError("clip tensor must be [T,H,W] or [C,T,H,W]", c.id);
      if (t.extent(1) != m.frames_per_clip) {
        throw LoadError("has " + std::to_string(t.extent(1)) + " frames, manifest says " +
                            std::to_string(m.frames_per_clip),
                        c.id);
      }
      if ((m.height && t.extent(2) != *m.height) || (m.width && t.extent(3) != *m.width)) {
        throw LoadError("frame size does not match manifest", c.id);
      }
      const auto [known, inserted] = stream_shapes.emplace(stream, t.shape());
      if (!inserted && known->second != t.shape()) {
        throw LoadError("'" + stream + "' shape differs from other clips", c.id);
      }
      if (stream == "rgb") {
        s.rgb = std::move(t);
      } else {
        s.flow = std::move(t);
      }
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace vnn
