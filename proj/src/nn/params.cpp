// SPDX-License-Identifier: Apache-2.0
#include "mvact/nn/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "mvact/error.hpp"

namespace mvact::nn {

std::size_t ParamSet::add(std::string name, Tensor value, bool trainable) {
  if (find(name)) throw Error(Errc::invalid_argument, "duplicate parameter " + name);
  items_.push_back({std::move(name), std::move(value), trainable});
  return items_.size() - 1;
}

std::optional<std::size_t> ParamSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (items_[i].name == name) return i;
  }
  return std::nullopt;
}

const Parameter& ParamSet::at(const std::string& name) const {
  const auto i = find(name);
  if (!i) throw Error(Errc::invalid_argument, "no parameter named " + name);
  return items_[*i];
}

Index ParamSet::trainable_count() const {
  Index n = 0;
  for (const auto& p : items_) n += p.trainable ? p.value.size() : 0;
  return n;
}

Index ParamSet::total_count() const {
  Index n = 0;
  for (const auto& p : items_) n += p.value.size();
  return n;
}

ParamBinder::ParamBinder(Graph& graph, const ParamSet& params, bool track_grads)
    : graph_(&graph), params_(&params), track_(track_grads), bound_(params.size(), -1) {}

Var ParamBinder::operator()(std::size_t index) {
  if (index >= bound_.size()) throw Error(Errc::invalid_argument, "parameter index out of range");
  if (bound_[index] < 0) {
    const Parameter& p = (*params_)[index];
    bound_[index] = graph_->leaf(p.value, track_ && p.trainable).id;
  }
  return {graph_, bound_[index]};
}

void ParamBinder::bind(std::size_t index, Var v) {
  if (index >= bound_.size()) throw Error(Errc::invalid_argument, "parameter index out of range");
  if (v.graph != graph_) throw Error(Errc::invalid_argument, "bound variable belongs to another graph");
  if (v.value().shape() != (*params_)[index].value.shape()) {
    throw Error(Errc::shape_mismatch, "binding " + to_string(v.value().shape()) + " to parameter " +
                                          (*params_)[index].name + " " + to_string((*params_)[index].value.shape()));
  }
  bound_[index] = v.id;
}

void ParamBinder::accumulate_grads(std::vector<Tensor>& accum, Real weight) const {
  for (std::size_t i = 0; i < bound_.size(); ++i) {
    if (bound_[i] < 0 || !(*params_)[i].trainable) continue;
    accum[i].flat() += weight * graph_->grad({graph_, bound_[i]}).flat();
  }
}

std::vector<Tensor> zero_grads(const ParamSet& params) {
  std::vector<Tensor> g;
  g.reserve(params.size());
  for (const auto& p : params) g.emplace_back(p.value.shape());
  return g;
}

std::uint64_t hash_tensor(const Tensor& t) {
  std::uint64_t h = 1469598103934665603ull;
  const auto mix = [&h](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  for (Index d : t.shape()) mix(static_cast<std::uint64_t>(d));
  for (Index i = 0; i < t.size(); ++i) mix(std::bit_cast<std::uint64_t>(t[i]));
  return h;
}

namespace {

constexpr std::uint32_t kMagic = 0x4B43564D;  // "MVCK"
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error(Errc::truncated_record, "checkpoint truncated: " + path);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamSet& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(Errc::io_failure, "cannot write checkpoint " + path);
  put_u32(os, kMagic);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_u32(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(os, p.trainable ? 1u : 0u);
    put_u32(os, static_cast<std::uint32_t>(p.value.rank()));
    for (Index d : p.value.shape()) put_u32(os, static_cast<std::uint32_t>(d));
  }
  for (const auto& p : params) {
    for (Index i = 0; i < p.value.size(); ++i) put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(p.value[i])));
  }
  if (!os) throw Error(Errc::io_failure, "failed writing checkpoint " + path);
}

ParamSet load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::io_failure, "cannot open checkpoint " + path);
  if (get_u32(is, path) != kMagic) throw Error(Errc::checkpoint_mismatch, "not a checkpoint: " + path);
  if (const auto v = get_u32(is, path); v != kVersion) {
    throw Error(Errc::version_mismatch, "checkpoint version " + std::to_string(v) + " unsupported");
  }
  const std::uint32_t count = get_u32(is, path);
  struct Entry {
    std::string name;
    bool trainable;
    Shape shape;
  };
  std::vector<Entry> table;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    const std::uint32_t len = get_u32(is, path);
    if (len > 4096) throw Error(Errc::checkpoint_mismatch, "implausible name length in " + path);
    e.name.resize(len);
    if (!is.read(e.name.data(), len)) throw Error(Errc::truncated_record, "checkpoint truncated: " + path);
    e.trainable = get_u32(is, path) != 0;
    const std::uint32_t rank = get_u32(is, path);
    if (rank > 8) throw Error(Errc::checkpoint_mismatch, "implausible rank in " + path);
    for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(get_u32(is, path));
    table.push_back(std::move(e));
  }
  ParamSet params;
  for (auto& e : table) {
    Tensor t(e.shape);
    for (Index i = 0; i < t.size(); ++i) t[i] = std::bit_cast<float>(get_u32(is, path));
    params.add(std::move(e.name), std::move(t), e.trainable);
  }
  return params;
}

void assign_parameters(ParamSet& target, const ParamSet& source) {
  if (target.size() != source.size()) {
    throw Error(Errc::checkpoint_mismatch, "checkpoint has " + std::to_string(source.size()) +
                                               " tensors, model expects " + std::to_string(target.size()));
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i].name != source[i].name || target[i].value.shape() != source[i].value.shape()) {
      throw Error(Errc::checkpoint_mismatch, "checkpoint tensor " + source[i].name + " " +
                                                 to_string(source[i].value.shape()) + " does not match model tensor " +
                                                 target[i].name + " " + to_string(target[i].value.shape()));
    }
  }
  for (std::size_t i = 0; i < target.size(); ++i) target[i].value = source[i].value;
}

}  // namespace mvact::nn
