#include "fasc/tensor_io.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "fasc/errors.hpp"

namespace fasc {

namespace {

constexpr char kMagic[8] = {'F', 'A', 'S', 'C', 'T', 'E', 'N', '1'};
constexpr std::size_t kHeaderBytes = 8 + 1 + 4 + 4 + 4;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

const char* kind_name(TensorKind k) {
  return k == TensorKind::activation ? "activation" : "gradient";
}

void write_tensor(const TensorBlock& block, const std::filesystem::path& path) {
  const std::int64_t n = block.n();
  const std::int64_t d = block.d();
  if (n < 1 || d < 1) throw validation_error("write_tensor: empty block");
  if (n > UINT32_MAX || d > UINT32_MAX)
    throw validation_error("write_tensor: dimensions exceed u32");
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < d; ++j)
      if (!std::isfinite(block.data(i, j)))
        throw validation_error("write_tensor: non-finite value at row " +
                               std::to_string(i) + " col " + std::to_string(j));

  std::string buf;
  buf.reserve(kHeaderBytes + static_cast<std::size_t>(n) * d * 4);
  buf.append(kMagic, 8);
  buf.push_back(static_cast<char>(block.kind));
  put_u32(buf, block.layer_id);
  put_u32(buf, static_cast<std::uint32_t>(n));
  put_u32(buf, static_cast<std::uint32_t>(d));
  // row-major payload; host is little-endian so a memcpy per value is the
  // LE encoding (static_assert cheap insurance below)
  static_assert(std::endian::native == std::endian::little,
                "tensor files are little-endian; big-endian hosts unsupported");
  const std::size_t payload = static_cast<std::size_t>(n) * d * 4;
  const std::size_t head = buf.size();
  buf.resize(head + payload);
  std::memcpy(buf.data() + head, block.data.data(), payload);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open for write: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw io_error("short write: " + path.string());
}

TensorBlock read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (in.bad()) throw io_error("read failed: " + path.string());

  if (buf.size() < kHeaderBytes || std::memcmp(buf.data(), kMagic, 8) != 0)
    throw validation_error("bad magic: " + path.string());

  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  const std::uint8_t kind_byte = p[8];
  if (kind_byte > 1)
    throw validation_error("bad kind byte " + std::to_string(kind_byte) + ": " +
                           path.string());
  const std::uint32_t layer_id = get_u32(p + 9);
  const std::uint32_t n = get_u32(p + 13);
  const std::uint32_t d = get_u32(p + 17);
  if (n < 1 || d < 1)
    throw validation_error("bad header dims " + std::to_string(n) + "x" +
                           std::to_string(d) + ": " + path.string());

  const std::size_t expect = kHeaderBytes + static_cast<std::size_t>(n) * d * 4;
  if (buf.size() < expect) throw validation_error("truncated payload: " + path.string());
  if (buf.size() > expect)
    throw validation_error("payload size mismatch (trailing bytes): " + path.string());

  TensorBlock block;
  block.kind = static_cast<TensorKind>(kind_byte);
  block.layer_id = layer_id;
  block.data.resize(n, d);
  std::memcpy(block.data.data(), buf.data() + kHeaderBytes,
              static_cast<std::size_t>(n) * d * 4);

  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < d; ++j)
      if (!std::isfinite(block.data(i, j)))
        throw validation_error("non-finite value at row " + std::to_string(i) +
                               " col " + std::to_string(j) + ": " + path.string());
  return block;
}

namespace {

// Checks one referenced file's header against the manifest row without
// reading the payload.
void check_header(const std::filesystem::path& path, TensorKind want_kind,
                  const ManifestLayer& row) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("manifest references missing file: " + path.string());
  char head[kHeaderBytes];
  in.read(head, kHeaderBytes);
  if (in.gcount() != static_cast<std::streamsize>(kHeaderBytes))
    throw validation_error("truncated payload: " + path.string());
  if (std::memcmp(head, kMagic, 8) != 0)
    throw validation_error("bad magic: " + path.string());
  const auto* p = reinterpret_cast<const unsigned char*>(head);
  if (p[8] != static_cast<std::uint8_t>(want_kind))
    throw validation_error("manifest kind mismatch for layer " +
                           std::to_string(row.layer_id) + ": " + path.string());
  if (get_u32(p + 9) != row.layer_id)
    throw validation_error("manifest layer_id mismatch: " + path.string());
  if (get_u32(p + 13) != row.n || get_u32(p + 17) != row.d)
    throw validation_error("manifest dims mismatch for layer " +
                           std::to_string(row.layer_id) + ": " + path.string());
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open manifest: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw validation_error("manifest is not valid JSON: " + std::string(e.what()));
  }

  Manifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    m.calibration_tag = j.value("calibration_tag", std::string{});
    const auto base = path.has_parent_path() ? path.parent_path()
                                             : std::filesystem::path(".");
    for (const auto& row : j.at("layers")) {
      ManifestLayer layer;
      layer.layer_id = row.at("layer_id").get<std::uint32_t>();
      layer.n = row.at("n").get<std::uint32_t>();
      layer.d = row.at("d").get<std::uint32_t>();
      std::filesystem::path act = row.at("activations").get<std::string>();
      std::filesystem::path grad = row.at("gradients").get<std::string>();
      layer.activations = act.is_absolute() ? act : base / act;
      layer.gradients = grad.is_absolute() ? grad : base / grad;
      m.layers.push_back(std::move(layer));
    }
  } catch (const nlohmann::json::exception& e) {
    throw validation_error("manifest missing field: " + std::string(e.what()));
  }
  if (m.layers.empty()) throw validation_error("empty manifest");

  std::set<std::uint32_t> ids;
  for (const auto& layer : m.layers) {
    if (!ids.insert(layer.layer_id).second)
      throw validation_error("duplicate layer_id " + std::to_string(layer.layer_id));
    if (layer.n < 1 || layer.d < 1)
      throw validation_error("manifest layer " + std::to_string(layer.layer_id) +
                             " has empty dims");
    check_header(layer.activations, TensorKind::activation, layer);
    check_header(layer.gradients, TensorKind::gradient, layer);
  }
  return m;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  const auto base = path.has_parent_path() ? path.parent_path()
                                           : std::filesystem::path(".");
  nlohmann::json j;
  j["format_version"] = manifest.format_version;
  j["calibration_tag"] = manifest.calibration_tag;
  j["layers"] = nlohmann::json::array();
  for (const auto& layer : manifest.layers) {
    nlohmann::json row;
    row["layer_id"] = layer.layer_id;
    row["n"] = layer.n;
    row["d"] = layer.d;
    // prefer paths relative to the manifest so fixture dirs are relocatable
    auto rel = [&](const std::filesystem::path& p) {
      std::error_code ec;
      auto r = std::filesystem::relative(p, base, ec);
      return (ec || r.empty()) ? p.string() : r.string();
    };
    row["activations"] = rel(layer.activations);
    row["gradients"] = rel(layer.gradients);
    j["layers"].push_back(std::move(row));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open manifest for write: " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw io_error("short write: " + path.string());
}

std::pair<TensorBlock, TensorBlock> load_layer(const ManifestLayer& layer) {
  TensorBlock xs = read_tensor(layer.activations);
  TensorBlock gs = read_tensor(layer.gradients);
  if (xs.kind != TensorKind::activation)
    throw validation_error("expected activation block: " + layer.activations.string());
  if (gs.kind != TensorKind::gradient)
    throw validation_error("expected gradient block: " + layer.gradients.string());
  if (xs.layer_id != gs.layer_id)
    throw validation_error("layer_id mismatch between paired blocks (" +
                           std::to_string(xs.layer_id) + " vs " +
                           std::to_string(gs.layer_id) + ")");
  if (xs.n() != gs.n() || xs.d() != gs.d())
    throw validation_error("paired blocks disagree on dims for layer " +
                           std::to_string(xs.layer_id));
  return {std::move(xs), std::move(gs)};
}

}  // namespace fasc
