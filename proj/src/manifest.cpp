#include <fstream>
#include <sstream>
#include <unordered_map>

#include "gistnet/data.hpp"
#include "json.hpp"

namespace gist {

using nlohmann::json;

namespace {

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

class FieldReader {
 public:
  explicit FieldReader(std::string source) : source_(std::move(source)) {}

  const json& member(const json& obj, const char* key, const std::string& where) const {
    if (!obj.is_object()) fail(where, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(where + "." + key, "missing field");
    return *it;
  }

  std::int64_t integer(const json& obj, const char* key, const std::string& where) const {
    const json& v = member(obj, key, where);
    if (!v.is_number_integer()) fail(where + "." + key, "expected an integer");
    return v.get<std::int64_t>();
  }

  std::optional<std::int64_t> optional_integer(const json& obj, const char* key, const std::string& where) const {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_number_integer()) fail(where + "." + key, "expected an integer");
    return it->get<std::int64_t>();
  }

  std::string string(const json& obj, const char* key, const std::string& where) const {
    const json& v = member(obj, key, where);
    if (!v.is_string()) fail(where + "." + key, "expected a string");
    return v.get<std::string>();
  }

  const json& array(const json& obj, const char* key) const {
    const json& v = member(obj, key, "manifest");
    if (!v.is_array()) fail(std::string("manifest.") + key, "expected an array");
    return v;
  }

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw ParseError(source_ + ": " + field + ": " + what);
  }

 private:
  std::string source_;
};

}  // namespace

DatasetManifest parse_manifest(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source + ": malformed JSON at " + line_col(text, e.byte) + ": " + e.what());
  }
  FieldReader r(source);
  if (!doc.is_object()) r.fail("manifest", "expected a top-level object");

  DatasetManifest m;
  const json& cats = r.array(doc, "categories");
  for (std::size_t i = 0; i < cats.size(); ++i) {
    const std::string where = "categories[" + std::to_string(i) + "]";
    m.categories.push_back({r.integer(cats[i], "id", where), r.string(cats[i], "name", where)});
  }
  const json& imgs = r.array(doc, "images");
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    const std::string where = "images[" + std::to_string(i) + "]";
    m.images.push_back({r.integer(imgs[i], "id", where), r.string(imgs[i], "file", where),
                        r.integer(imgs[i], "width", where), r.integer(imgs[i], "height", where)});
  }
  const json& anns = r.array(doc, "annotations");
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string where = "annotations[" + std::to_string(i) + "]";
    const json& a = anns[i];
    AnnotationEntry e;
    e.image_id = r.integer(a, "image_id", where);
    e.category_id = r.integer(a, "category_id", where);
    const json& box = r.member(a, "bbox", where);
    if (!box.is_array() || box.size() != 4) r.fail(where + ".bbox", "expected [x, y, w, h]");
    std::int64_t v[4];
    for (std::size_t k = 0; k < 4; ++k) {
      if (!box[k].is_number_integer()) r.fail(where + ".bbox[" + std::to_string(k) + "]", "expected an integer");
      v[k] = box[k].get<std::int64_t>();
    }
    e.bbox = Rect{v[0], v[1], v[2], v[3]};
    e.scene_class = r.optional_integer(a, "scene_class", where);
    e.scene_superclass = r.optional_integer(a, "scene_superclass", where);
    m.annotations.push_back(e);
  }
  return m;
}

std::string serialize_manifest(const DatasetManifest& m) {
  json doc;
  doc["categories"] = json::array();
  for (const auto& c : m.categories) doc["categories"].push_back({{"id", c.id}, {"name", c.name}});
  doc["images"] = json::array();
  for (const auto& im : m.images)
    doc["images"].push_back({{"id", im.id}, {"file", im.file}, {"width", im.width}, {"height", im.height}});
  doc["annotations"] = json::array();
  for (const auto& a : m.annotations) {
    json j = {{"image_id", a.image_id},
              {"bbox", {a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h}},
              {"category_id", a.category_id}};
    if (a.scene_class) j["scene_class"] = *a.scene_class;
    if (a.scene_superclass) j["scene_superclass"] = *a.scene_superclass;
    doc["annotations"].push_back(std::move(j));
  }
  return doc.dump(1) + "\n";
}

void DatasetManifest::validate() const {
  std::unordered_map<std::int64_t, const ImageEntry*> by_id;
  for (const auto& im : images) by_id.emplace(im.id, &im);
  std::unordered_map<std::int64_t, std::size_t> cats;
  for (std::size_t c = 0; c < categories.size(); ++c) cats.emplace(categories[c].id, c);
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& a = annotations[i];
    const std::string where = "annotation " + std::to_string(i);
    auto it = by_id.find(a.image_id);
    if (it == by_id.end()) throw ValidationError(where + ": unknown image_id " + std::to_string(a.image_id));
    const ImageEntry* img = it->second;
    if (!cats.count(a.category_id))
      throw ValidationError(where + ": unknown category_id " + std::to_string(a.category_id));
    const Rect& b = a.bbox;
    if (b.w < 1 || b.h < 1 || b.x < 0 || b.y < 0 || b.x + b.w > img->width || b.y + b.h > img->height)
      throw ValidationError(where + ": bbox [" + std::to_string(b.x) + ", " + std::to_string(b.y) + ", " +
                            std::to_string(b.w) + ", " + std::to_string(b.h) + "] outside image " +
                            std::to_string(img->width) + "x" + std::to_string(img->height));
  }
}

std::size_t DatasetManifest::category_index(std::int64_t category_id) const {
  for (std::size_t i = 0; i < categories.size(); ++i)
    if (categories[i].id == category_id) return i;
  throw ValidationError("unknown category_id " + std::to_string(category_id));
}

const ImageEntry& DatasetManifest::image(std::int64_t image_id) const {
  for (const auto& im : images)
    if (im.id == image_id) return im;
  throw ValidationError("unknown image_id " + std::to_string(image_id));
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.string());
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << serialize_manifest(manifest);
  if (!out) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------

ManifestReader::ManifestReader(const std::filesystem::path& manifest_path)
    : ManifestReader(load_manifest(manifest_path), manifest_path.parent_path()) {}

ManifestReader::ManifestReader(DatasetManifest manifest, std::filesystem::path base_dir)
    : manifest_(std::move(manifest)), base_dir_(std::move(base_dir)) {
  manifest_.validate();
  std::unordered_map<std::int64_t, std::size_t> images;
  for (std::size_t i = 0; i < manifest_.images.size(); ++i) images.emplace(manifest_.images[i].id, i);
  std::unordered_map<std::int64_t, std::size_t> cats;
  for (std::size_t c = 0; c < manifest_.categories.size(); ++c) cats.emplace(manifest_.categories[c].id, c);
  for (const auto& a : manifest_.annotations) {
    image_index_.push_back(images.at(a.image_id));
    class_index_.push_back(cats.at(a.category_id));
  }
}

SceneSample ManifestReader::sample(std::size_t index) const {
  if (index >= size()) throw ArgumentError("sample index " + std::to_string(index) + " out of range");
  const auto& a = manifest_.annotations[index];
  const auto& entry = manifest_.images[image_index_[index]];
  std::filesystem::path file(entry.file);
  if (file.is_relative()) file = base_dir_ / file;
  if (!std::filesystem::exists(file)) throw IoError("missing image file " + file.string());
  SceneSample s;
  s.image = read_ppm(file);
  if (static_cast<std::int64_t>(s.image.width) != entry.width ||
      static_cast<std::int64_t>(s.image.height) != entry.height)
    throw ValidationError(file.string() + ": decoded size " + std::to_string(s.image.width) + "x" +
                          std::to_string(s.image.height) + " disagrees with the manifest");
  s.bbox = a.bbox;
  s.category = class_index_[index];
  s.scene_class = a.scene_class.value_or(-1);
  s.scene_superclass = a.scene_superclass.value_or(-1);
  return s;
}

std::vector<SceneSample> ManifestReader::load_all() const {
  std::vector<SceneSample> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(sample(i));
  return out;
}

DatasetManifest write_dataset(const std::filesystem::path& dir, const std::string& manifest_name,
                              const std::string& prefix, const std::vector<SceneSample>& samples,
                              const std::vector<std::string>& category_names) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  DatasetManifest m;
  for (std::size_t c = 0; c < category_names.size(); ++c)
    m.categories.push_back({static_cast<std::int64_t>(c), category_names[c]});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%06zu.ppm", prefix.c_str(), i);
    write_ppm(dir / name, s.image);
    const auto id = static_cast<std::int64_t>(i);
    m.images.push_back({id, name, static_cast<std::int64_t>(s.image.width), static_cast<std::int64_t>(s.image.height)});
    AnnotationEntry a;
    a.image_id = id;
    a.bbox = s.bbox;
    a.category_id = static_cast<std::int64_t>(s.category);
    if (s.scene_class >= 0) a.scene_class = s.scene_class;
    if (s.scene_superclass >= 0) a.scene_superclass = s.scene_superclass;
    m.annotations.push_back(a);
  }
  save_manifest(m, dir / manifest_name);
  return m;
}

}  // namespace gist
