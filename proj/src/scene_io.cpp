#include "cityforge/scene_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "cityforge/error.hpp"
#include "json.hpp"

namespace cityforge {
namespace {

using Json = nlohmann::ordered_json;

constexpr std::uint32_t kGlbMagic = 0x46546C67;  // "glTF"
constexpr std::uint32_t kChunkJson = 0x4E4F534A;
constexpr std::uint32_t kChunkBin = 0x004E4942;

struct ExportNode {
  std::string name;
  Mesh mesh;
  int parent = -1;
};

Vec3 to_y_up(Vec3 v) { return {v.x, v.z, -v.y}; }
Vec3 from_y_up(Vec3 v) { return {v.x, -v.z, v.y}; }

std::vector<ExportNode> export_nodes(const executor::ScenePackage& scene) {
  std::vector<ExportNode> nodes;
  for (const auto& b : scene.buildings) {
    const int parent = static_cast<int>(nodes.size());
    nodes.push_back({b.id, b.shell, -1});
    nodes.push_back({b.id + ".components", b.components, parent});
  }
  for (const auto& [id, mesh] : scene.greenspaces) nodes.push_back({id, mesh, -1});
  nodes.push_back({"streets", scene.streets, -1});
  Mesh props;
  for (const auto& p : scene.props) props.append(executor::prop_mesh(p));
  nodes.push_back({"props", std::move(props), -1});
  return nodes;
}

std::array<double, 4> base_color(Material m) {
  switch (m) {
    case Material::Concrete: return {0.62, 0.62, 0.60, 1.0};
    case Material::Glass: return {0.55, 0.72, 0.85, 1.0};
    case Material::Wood: return {0.52, 0.36, 0.22, 1.0};
    case Material::Metal: return {0.45, 0.47, 0.50, 1.0};
    case Material::Greenery: return {0.18, 0.62, 0.27, 1.0};
    case Material::Asphalt: return {0.16, 0.16, 0.17, 1.0};
  }
  return {1.0, 1.0, 1.0, 1.0};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Triangles of one material, reindexed to the vertices they use.
struct Primitive {
  Material material;
  std::vector<Vec3> vertices;
  std::vector<std::uint32_t> indices;
};

std::vector<Primitive> split_by_material(const Mesh& mesh) {
  std::vector<Primitive> out;
  for (const Material m : kAllMaterials) {
    Primitive prim{m, {}, {}};
    std::map<std::uint32_t, std::uint32_t> remap;
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
      if (mesh.face_material[i] != m) continue;
      for (const std::uint32_t v : mesh.triangles[i]) {
        const auto [it, inserted] = remap.try_emplace(v, static_cast<std::uint32_t>(prim.vertices.size()));
        if (inserted) prim.vertices.push_back(mesh.vertices[v]);
        prim.indices.push_back(it->second);
      }
    }
    if (!prim.indices.empty()) out.push_back(std::move(prim));
  }
  return out;
}

void append_bytes(std::vector<std::uint8_t>& buf, const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  buf.insert(buf.end(), p, p + n);
}

void pad_to_4(std::vector<std::uint8_t>& buf, std::uint8_t fill) {
  while (buf.size() % 4 != 0) buf.push_back(fill);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
  if (at + 4 > bytes.size()) throw Error(Errc::BadSceneFile, "truncated glb");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
  return v;
}

Json metadata_json(const executor::ScenePackage& scene) {
  Json meta;
  meta["block_hash"] = hex64(scene.metadata.block_hash);
  Json hashes = Json::object();
  for (const auto& [id, h] : scene.metadata.building_hashes) hashes[id] = hex64(h);
  meta["building_hashes"] = hashes;
  Json heights = Json::object();
  for (const auto& [id, h] : scene.metadata.floor_heights) heights[id] = h;
  meta["building_heights"] = heights;
  meta["floor_height"] = scene.metadata.floor_height;
  meta["seed"] = scene.metadata.seed;
  return meta;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

}  // namespace

std::optional<SceneFormat> scene_format_from_string(std::string_view name) {
  if (name == "obj") return SceneFormat::Obj;
  if (name == "glb" || name == "gltf") return SceneFormat::Glb;
  return std::nullopt;
}

std::vector<std::uint8_t> glb_bytes(const executor::ScenePackage& scene) {
  const auto nodes = export_nodes(scene);
  std::vector<std::uint8_t> bin;
  Json accessors = Json::array();
  Json views = Json::array();
  Json meshes = Json::array();
  Json gl_nodes = Json::array();
  std::vector<std::vector<int>> children(nodes.size());
  Json roots = Json::array();

  for (std::size_t n = 0; n < nodes.size(); ++n) {
    Json node;
    node["name"] = nodes[n].name;
    const auto prims = split_by_material(nodes[n].mesh);
    if (!prims.empty()) {
      Json primitives = Json::array();
      for (const auto& prim : prims) {
        // POSITION
        std::array<float, 3> lo{std::numeric_limits<float>::max(), std::numeric_limits<float>::max(),
                                std::numeric_limits<float>::max()};
        std::array<float, 3> hi{-lo[0], -lo[1], -lo[2]};
        const std::size_t pos_offset = bin.size();
        for (const Vec3& v : prim.vertices) {
          const Vec3 y = to_y_up(v);
          const std::array<float, 3> f{static_cast<float>(y.x), static_cast<float>(y.y), static_cast<float>(y.z)};
          for (int k = 0; k < 3; ++k) {
            lo[k] = std::min(lo[k], f[k]);
            hi[k] = std::max(hi[k], f[k]);
          }
          append_bytes(bin, f.data(), sizeof f);
        }
        views.push_back({{"buffer", 0}, {"byteOffset", pos_offset}, {"byteLength", bin.size() - pos_offset},
                         {"target", 34962}});
        accessors.push_back({{"bufferView", views.size() - 1},
                             {"componentType", 5126},
                             {"count", prim.vertices.size()},
                             {"type", "VEC3"},
                             {"min", {lo[0], lo[1], lo[2]}},
                             {"max", {hi[0], hi[1], hi[2]}}});
        const std::size_t pos_accessor = accessors.size() - 1;

        const std::size_t idx_offset = bin.size();
        append_bytes(bin, prim.indices.data(), prim.indices.size() * sizeof(std::uint32_t));
        views.push_back({{"buffer", 0}, {"byteOffset", idx_offset}, {"byteLength", bin.size() - idx_offset},
                         {"target", 34963}});
        accessors.push_back({{"bufferView", views.size() - 1},
                             {"componentType", 5125},
                             {"count", prim.indices.size()},
                             {"type", "SCALAR"}});
        primitives.push_back({{"attributes", {{"POSITION", pos_accessor}}},
                              {"indices", accessors.size() - 1},
                              {"material", static_cast<int>(prim.material)},
                              {"mode", 4}});
      }
      meshes.push_back({{"name", nodes[n].name}, {"primitives", primitives}});
      node["mesh"] = meshes.size() - 1;
    }
    gl_nodes.push_back(node);
    if (nodes[n].parent >= 0) children[nodes[n].parent].push_back(static_cast<int>(n));
    else roots.push_back(n);
  }
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    if (!children[n].empty()) gl_nodes[n]["children"] = children[n];
  }

  Json materials = Json::array();
  for (const Material m : kAllMaterials) {
    const auto c = base_color(m);
    materials.push_back({{"name", std::string(to_string(m))},
                         {"pbrMetallicRoughness",
                          {{"baseColorFactor", {c[0], c[1], c[2], c[3]}},
                           {"metallicFactor", m == Material::Metal ? 0.8 : 0.0},
                           {"roughnessFactor", m == Material::Glass ? 0.1 : 0.8}}}});
  }

  Json gltf;
  gltf["asset"] = {{"version", "2.0"}, {"generator", "cityforge"}, {"extras", metadata_json(scene)}};
  gltf["scene"] = 0;
  gltf["scenes"] = Json::array({{{"name", "block"}, {"nodes", roots}}});
  gltf["nodes"] = gl_nodes;
  gltf["materials"] = materials;
  if (!meshes.empty()) {
    gltf["meshes"] = meshes;
    gltf["accessors"] = accessors;
    gltf["bufferViews"] = views;
    gltf["buffers"] = Json::array({{{"byteLength", bin.size()}}});
  }

  std::string json_text = gltf.dump();
  while (json_text.size() % 4 != 0) json_text.push_back(' ');
  pad_to_4(bin, 0);

  std::vector<std::uint8_t> out;
  const bool has_bin = !bin.empty();
  const std::size_t total = 12 + 8 + json_text.size() + (has_bin ? 8 + bin.size() : 0);
  put_u32(out, kGlbMagic);
  put_u32(out, 2);
  put_u32(out, static_cast<std::uint32_t>(total));
  put_u32(out, static_cast<std::uint32_t>(json_text.size()));
  put_u32(out, kChunkJson);
  append_bytes(out, json_text.data(), json_text.size());
  if (has_bin) {
    put_u32(out, static_cast<std::uint32_t>(bin.size()));
    put_u32(out, kChunkBin);
    append_bytes(out, bin.data(), bin.size());
  }
  return out;
}

ObjText obj_text(const executor::ScenePackage& scene, const std::string& mtl_filename) {
  ObjText result;
  std::ostringstream obj;
  obj << "# cityforge scene, y-up\n";
  obj << "mtllib " << mtl_filename << "\n";
  std::size_t base = 1;
  for (const auto& node : export_nodes(scene)) {
    obj << "o " << node.name << "\n";
    for (const Vec3& v : node.mesh.vertices) {
      const Vec3 y = to_y_up(v);
      obj << "v " << number(y.x) << ' ' << number(y.y) << ' ' << number(y.z) << "\n";
    }
    for (const Material m : kAllMaterials) {
      bool announced = false;
      for (std::size_t i = 0; i < node.mesh.triangles.size(); ++i) {
        if (node.mesh.face_material[i] != m) continue;
        if (!announced) {
          obj << "usemtl " << to_string(m) << "\n";
          announced = true;
        }
        const auto& t = node.mesh.triangles[i];
        obj << "f " << t[0] + base << ' ' << t[1] + base << ' ' << t[2] + base << "\n";
      }
    }
    base += node.mesh.vertices.size();
  }
  result.obj = obj.str();

  std::ostringstream mtl;
  for (const Material m : kAllMaterials) {
    const auto c = base_color(m);
    mtl << "newmtl " << to_string(m) << "\n";
    mtl << "Kd " << number(c[0]) << ' ' << number(c[1]) << ' ' << number(c[2]) << "\n";
    mtl << "d 1\n\n";
  }
  result.mtl = mtl.str();
  return result;
}

void export_scene(const executor::ScenePackage& scene, SceneFormat format, const std::filesystem::path& path) {
  if (format == SceneFormat::Glb) {
    const auto bytes = glb_bytes(scene);
    write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    return;
  }
  std::filesystem::path mtl = path;
  mtl.replace_extension(".mtl");
  const auto text = obj_text(scene, mtl.filename().string());
  write_file(path, text.obj);
  write_file(mtl, text.mtl);
}

std::size_t ImportedScene::triangle_count() const {
  std::size_t n = 0;
  for (const auto& node : nodes) n += node.mesh.triangle_count();
  return n;
}

const ImportedNode* ImportedScene::find(std::string_view name) const {
  for (const auto& node : nodes) {
    if (node.name == name) return &node;
  }
  return nullptr;
}

ImportedScene import_glb(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 20 || get_u32(bytes, 0) != kGlbMagic) throw Error(Errc::BadSceneFile, "not a glb file");
  if (get_u32(bytes, 4) != 2) throw Error(Errc::BadSceneFile, "unsupported glb version");
  const std::uint32_t json_len = get_u32(bytes, 12);
  if (get_u32(bytes, 16) != kChunkJson || 20 + std::size_t{json_len} > bytes.size()) {
    throw Error(Errc::BadSceneFile, "missing JSON chunk");
  }
  Json gltf;
  try {
    gltf = Json::parse(bytes.begin() + 20, bytes.begin() + 20 + json_len);
  } catch (const Json::exception& e) {
    throw Error(Errc::BadSceneFile, std::string("bad glb JSON: ") + e.what());
  }
  std::span<const std::uint8_t> bin;
  const std::size_t bin_at = 20 + std::size_t{json_len};
  if (bin_at + 8 <= bytes.size()) {
    const std::uint32_t bin_len = get_u32(bytes, bin_at);
    if (get_u32(bytes, bin_at + 4) != kChunkBin || bin_at + 8 + bin_len > bytes.size()) {
      throw Error(Errc::BadSceneFile, "bad BIN chunk");
    }
    bin = bytes.subspan(bin_at + 8, bin_len);
  }

  auto accessor_data = [&](std::size_t index, std::size_t component_size, std::size_t components) {
    const Json& acc = gltf.at("accessors").at(index);
    const Json& view = gltf.at("bufferViews").at(acc.at("bufferView").get<std::size_t>());
    const std::size_t offset = view.value("byteOffset", std::size_t{0}) + acc.value("byteOffset", std::size_t{0});
    const std::size_t count = acc.at("count").get<std::size_t>();
    const std::size_t need = count * component_size * components;
    if (offset + need > bin.size()) throw Error(Errc::BadSceneFile, "accessor outside buffer");
    return std::pair{bin.subspan(offset, need), count};
  };

  ImportedScene scene;
  try {
    for (const Json& node : gltf.value("nodes", Json::array())) {
      ImportedNode out;
      out.name = node.value("name", std::string());
      if (node.contains("mesh")) {
        const Json& mesh = gltf.at("meshes").at(node["mesh"].get<std::size_t>());
        for (const Json& prim : mesh.at("primitives")) {
          const auto [pos, vcount] = accessor_data(prim.at("attributes").at("POSITION").get<std::size_t>(), 4, 3);
          const auto [idx, icount] = accessor_data(prim.at("indices").get<std::size_t>(), 4, 1);
          const auto base = static_cast<std::uint32_t>(out.mesh.vertices.size());
          for (std::size_t i = 0; i < vcount; ++i) {
            float f[3];
            std::memcpy(f, pos.data() + i * 12, 12);
            out.mesh.add_vertex(from_y_up({f[0], f[1], f[2]}));
          }
          const auto material = static_cast<Material>(prim.value("material", 0));
          for (std::size_t i = 0; i + 2 < icount; i += 3) {
            std::uint32_t t[3];
            std::memcpy(t, idx.data() + i * 4, 12);
            for (const auto v : t) {
              if (v >= vcount) throw Error(Errc::BadSceneFile, "index out of range");
            }
            out.mesh.add_triangle(base + t[0], base + t[1], base + t[2], material);
          }
        }
      }
      scene.nodes.push_back(std::move(out));
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::BadSceneFile, std::string("malformed glb: ") + e.what());
  }
  return scene;
}

ImportedScene import_obj(std::string_view text) {
  ImportedScene scene;
  std::vector<Vec3> vertices;
  std::map<std::size_t, std::uint32_t> local;  // global vertex index -> node-local index
  Material current = Material::Concrete;
  auto ensure_node = [&] {
    if (scene.nodes.empty()) scene.nodes.push_back({"", {}});
  };
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "o" || tag == "g") {
      std::string name;
      std::getline(ls >> std::ws, name);
      scene.nodes.push_back({name, {}});
      local.clear();
    } else if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x >> v.y >> v.z)) throw Error(Errc::BadSceneFile, "bad vertex on line " + std::to_string(line_no));
      vertices.push_back(v);
    } else if (tag == "usemtl") {
      std::string name;
      ls >> name;
      current = material_from_string(name).value_or(Material::Concrete);
    } else if (tag == "f") {
      ensure_node();
      std::vector<std::uint32_t> face;
      std::string ref;
      while (ls >> ref) {
        long idx = 0;
        const auto r = std::from_chars(ref.data(), ref.data() + ref.size(), idx);
        if (r.ec != std::errc{} || idx == 0) throw Error(Errc::BadSceneFile, "bad face on line " + std::to_string(line_no));
        const long abs = idx > 0 ? idx - 1 : static_cast<long>(vertices.size()) + idx;
        if (abs < 0 || abs >= static_cast<long>(vertices.size())) {
          throw Error(Errc::BadSceneFile, "face index out of range on line " + std::to_string(line_no));
        }
        auto& mesh = scene.nodes.back().mesh;
        const auto [it, inserted] = local.try_emplace(static_cast<std::size_t>(abs), 0);
        if (inserted) it->second = mesh.add_vertex(from_y_up(vertices[static_cast<std::size_t>(abs)]));
        face.push_back(it->second);
      }
      if (face.size() < 3) throw Error(Errc::BadSceneFile, "face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < face.size(); ++k) {
        scene.nodes.back().mesh.add_triangle(face[0], face[k], face[k + 1], current);
      }
    }
  }
  return scene;
}

ImportedScene import_scene(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto ext = path.extension().string();
  if (ext == ".glb") {
    return import_glb(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
  }
  if (ext == ".obj") return import_obj(bytes);
  throw Error(Errc::UnsupportedFormat, "unsupported scene extension '" + ext + "'");
}

std::size_t scene_triangle_count(const executor::ScenePackage& scene) {
  std::size_t n = 0;
  for (const auto& node : export_nodes(scene)) n += node.mesh.triangle_count();
  return n;
}

}  // namespace cityforge
