// SPDX-License-Identifier: Apache-2.0
#include "mvact/dataset.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "mvact/error.hpp"

namespace mvact::demo {
namespace {

namespace fs = std::filesystem;

constexpr std::uint32_t kRecordVersion = 1;
constexpr std::size_t kHeaderWords = 10;
constexpr std::size_t kTargetFloats = 9;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

void put_f32(std::string& buf, float f) { put_u32(buf, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(const std::string& buf, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset + static_cast<std::size_t>(i)])) << (8 * i);
  }
  return v;
}

float get_f32(const std::string& buf, std::size_t offset) { return std::bit_cast<float>(get_u32(buf, offset)); }

std::string record_name(std::size_t i) {
  std::ostringstream os;
  os.width(6);
  os.fill('0');
  os << i << ".bin";
  return os.str();
}

std::string encode_record(const TrainingSample& s) {
  const auto n = static_cast<std::uint32_t>(s.observation.size());
  const auto h = static_cast<std::uint32_t>(s.valid_mask.size());
  const auto m = static_cast<std::uint32_t>(s.targets.size());
  const std::uint32_t xyz_off = kHeaderWords * 4;
  const std::uint32_t rgb_off = xyz_off + n * 3 * 4;
  const std::uint32_t tgt_off = rgb_off + n * 3 * 4;
  const std::uint32_t mask_off = tgt_off + m * kTargetFloats * 4;
  const std::uint32_t total = mask_off + h * 4;

  std::string buf;
  buf.reserve(total);
  for (std::uint32_t v : {kSampleMagic, kRecordVersion, n, h, m, xyz_off, rgb_off, tgt_off, mask_off, total}) {
    put_u32(buf, v);
  }
  for (Eigen::Index i = 0; i < s.observation.size(); ++i) {
    for (int c = 0; c < 3; ++c) put_f32(buf, s.observation.xyz(i, c));
  }
  for (Eigen::Index i = 0; i < s.observation.size(); ++i) {
    for (int c = 0; c < 3; ++c) put_f32(buf, s.observation.rgb(i, c));
  }
  for (const auto& a : s.targets) {
    for (float f : {a.position.x(), a.position.y(), a.position.z(), a.rotation.w(), a.rotation.x(), a.rotation.y(),
                    a.rotation.z(), a.gripper_open ? 1.0f : 0.0f, a.collision_allowed ? 1.0f : 0.0f}) {
      put_f32(buf, f);
    }
  }
  for (auto v : s.valid_mask) put_f32(buf, v ? 1.0f : 0.0f);
  return buf;
}

void decode_record(const std::string& buf, const std::string& name, TrainingSample& s) {
  if (buf.size() < kHeaderWords * 4) throw Error(Errc::truncated_record, name + ": shorter than header");
  if (get_u32(buf, 0) != kSampleMagic) throw Error(Errc::malformed_manifest, name + ": bad magic");
  if (get_u32(buf, 4) != kRecordVersion) throw Error(Errc::version_mismatch, name + ": unknown record version");
  const std::uint32_t n = get_u32(buf, 8);
  const std::uint32_t h = get_u32(buf, 12);
  const std::uint32_t m = get_u32(buf, 16);
  const std::uint32_t xyz_off = get_u32(buf, 20);
  const std::uint32_t rgb_off = get_u32(buf, 24);
  const std::uint32_t tgt_off = get_u32(buf, 28);
  const std::uint32_t mask_off = get_u32(buf, 32);
  const std::uint32_t total = get_u32(buf, 36);
  if (buf.size() < total) throw Error(Errc::truncated_record, name + ": payload truncated");
  const auto fits = [&](std::uint64_t off, std::uint64_t count) { return off + count * 4 <= total; };
  if (!fits(xyz_off, 3ull * n) || !fits(rgb_off, 3ull * n) || !fits(tgt_off, kTargetFloats * m) ||
      !fits(mask_off, h) || m > h) {
    throw Error(Errc::malformed_manifest, name + ": inconsistent field offsets");
  }

  s.observation.xyz.resize(n, 3);
  s.observation.rgb.resize(n, 3);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t c = 0; c < 3; ++c) {
      s.observation.xyz(i, c) = get_f32(buf, xyz_off + (i * 3 + c) * 4);
      s.observation.rgb(i, c) = get_f32(buf, rgb_off + (i * 3 + c) * 4);
    }
  }
  s.targets.resize(m);
  for (std::uint32_t j = 0; j < m; ++j) {
    float f[kTargetFloats];
    for (std::size_t k = 0; k < kTargetFloats; ++k) f[k] = get_f32(buf, tgt_off + (j * kTargetFloats + k) * 4);
    auto& a = s.targets[j];
    a.position = Eigen::Vector3f(f[0], f[1], f[2]);
    a.rotation = Eigen::Quaternionf(f[3], f[4], f[5], f[6]);
    a.gripper_open = f[7] != 0.0f;
    a.collision_allowed = f[8] != 0.0f;
  }
  s.valid_mask.resize(h);
  for (std::uint32_t j = 0; j < h; ++j) s.valid_mask[j] = get_f32(buf, mask_off + j * 4) != 0.0f ? 1 : 0;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

template <typename T>
T parse_number(const std::string& text, const std::string& key) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw Error(Errc::malformed_manifest, "bad value for '" + key + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void write_dataset(const fs::path& dir, const Dataset& dataset) {
  std::error_code ec;
  fs::create_directories(dir / "samples", ec);
  if (ec) throw Error(Errc::io_failure, "cannot create " + dir.string() + ": " + ec.message());

  std::ostringstream manifest;
  manifest << "# mvact dataset manifest\n";
  manifest << "schema_version = " << kDatasetSchemaVersion << "\n";
  manifest << "created = " << dataset.info.created << "\n";
  manifest << "horizon = " << dataset.info.horizon << "\n";
  manifest << "seed = " << dataset.info.seed << "\n";
  manifest << "tasks = ";
  for (std::size_t i = 0; i < dataset.info.tasks.size(); ++i) manifest << (i ? "," : "") << dataset.info.tasks[i];
  manifest << "\ncount = " << dataset.samples.size() << "\n";

  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const TrainingSample& s = dataset.samples[i];
    if (s.horizon() != dataset.info.horizon) {
      throw Error(Errc::invalid_argument, "sample " + std::to_string(i) + " horizon differs from dataset");
    }
    const std::string name = record_name(i);
    manifest << "sample." << i << " = file=" << name << " template=" << s.instruction.template_id << " slots=";
    for (std::size_t k = 0; k < s.instruction.slot_bindings.size(); ++k) {
      manifest << (k ? "," : "") << s.instruction.slot_bindings[k];
    }
    manifest << " anchor=" << s.anchor_step << " episode_seed=" << s.episode_seed << "\n";

    std::ofstream out(dir / "samples" / name, std::ios::binary | std::ios::trunc);
    const std::string rec = encode_record(s);
    out.write(rec.data(), static_cast<std::streamsize>(rec.size()));
    if (!out) throw Error(Errc::io_failure, "cannot write " + name);
  }
  std::ofstream out(dir / "manifest.txt", std::ios::trunc);
  out << manifest.str();
  if (!out) throw Error(Errc::io_failure, "cannot write manifest");
}

Dataset read_dataset(const fs::path& dir) {
  std::istringstream in(read_file(dir / "manifest.txt"));
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(Errc::malformed_manifest, "line without '=': " + t);
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  const auto need = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw Error(Errc::malformed_manifest, "missing key '" + key + "'");
    return it->second;
  };

  const int version = parse_number<int>(need("schema_version"), "schema_version");
  if (version != kDatasetSchemaVersion) {
    throw Error(Errc::version_mismatch, "dataset schema " + std::to_string(version) + " is not supported");
  }
  Dataset ds;
  ds.info.created = kv.count("created") ? kv["created"] : "";
  ds.info.horizon = parse_number<int>(need("horizon"), "horizon");
  ds.info.seed = parse_number<std::uint64_t>(need("seed"), "seed");
  ds.info.tasks = split(need("tasks"), ',');
  const auto count = parse_number<std::size_t>(need("count"), "count");

  ds.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string key = "sample." + std::to_string(i);
    std::istringstream fields(need(key));
    std::map<std::string, std::string> f;
    std::string token;
    while (fields >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) throw Error(Errc::malformed_manifest, key + ": bad field '" + token + "'");
      f[token.substr(0, eq)] = token.substr(eq + 1);
    }
    for (const char* k : {"file", "template", "slots", "anchor", "episode_seed"}) {
      if (!f.count(k)) throw Error(Errc::malformed_manifest, key + ": missing " + k);
    }
    TrainingSample& s = ds.samples[i];
    s.instruction.template_id = parse_number<int>(f["template"], key);
    for (const auto& v : split(f["slots"], ',')) s.instruction.slot_bindings.push_back(parse_number<int>(v, key));
    s.anchor_step = parse_number<int>(f["anchor"], key);
    s.episode_seed = parse_number<std::uint64_t>(f["episode_seed"], key);
    decode_record(read_file(dir / "samples" / f["file"]), f["file"], s);
    if (s.horizon() != ds.info.horizon) throw Error(Errc::malformed_manifest, key + ": horizon mismatch");
  }
  return ds;
}

}  // namespace mvact::demo
