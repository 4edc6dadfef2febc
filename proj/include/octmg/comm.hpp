#pragma once

#include <cstring>
#include <map>
#include <unordered_map>

#include "octmg/interp.hpp"

namespace octmg {

/// Routed ghost-exchange message. `direction` and `segment_index` are
/// receiver-relative: the face being filled and, for fine-to-coarse
/// reception, which sub-rectangle of it. The fields together are the wire
/// equivalent of encoding the neighbor's segment index into a message tag.
template <int D>
struct Envelope {
  BlockId<D> src{};
  BlockId<D> dst{};
  Direction direction{};
  RefineCase kase = RefineCase::same_level;
  int segment_index = 0;
  std::vector<real> payload;
};

template <int D>
struct SendDescriptor {
  int src_leaf = 0;
  int dst_leaf = 0;
  Direction dir{};       // sender-relative
  RefineCase kase = RefineCase::same_level;
  int send_segment = 0;  // sub-rectangle of the sender's face (C2F only)
  int recv_segment = 0;  // receiver-view segment carried by the envelope
  CellRange<D> source{};
  int payload_len = 0;
};

template <int D>
struct RecvDescriptor {
  int dst_leaf = 0;
  int src_leaf = 0;
  Direction dir{};  // receiver-relative
  RefineCase kase = RefineCase::same_level;
  int segment = 0;
  CellRange<D> ghost{};
  int payload_len = 0;
};

/// All send/receive descriptors of one bulk-synchronous exchange at one
/// multigrid level. Sends and receives are matched one-to-one at build
/// time; a mismatch is a topology bug and throws.
template <int D>
struct ExchangePlan {
  int mg_level = 0;
  int cells = 0;  // interior cells per dimension at this level
  std::vector<SendDescriptor<D>> sends;
  std::vector<RecvDescriptor<D>> recvs;
  std::vector<int> send_to_recv;
};

struct VolumeCounters {
  long long messages = 0;
  long long scalars = 0;
  long long bytes = 0;

  void add(long long count) {
    messages += 1;
    scalars += count;
    bytes += count * static_cast<long long>(sizeof(real));
  }

  friend bool operator==(const VolumeCounters&, const VolumeCounters&) = default;
};

/// Message/scalar/byte counts per refinement case, broken down by mg level.
struct VolumeReport {
  std::map<int, std::array<VolumeCounters, 3>> per_level;

  VolumeCounters& at(int mg_level, RefineCase c) {
    return per_level[mg_level][static_cast<int>(c)];
  }

  VolumeCounters total(RefineCase c) const {
    VolumeCounters t;
    for (const auto& [lvl, arr] : per_level) {
      const auto& v = arr[static_cast<int>(c)];
      t.messages += v.messages;
      t.scalars += v.scalars;
      t.bytes += v.bytes;
    }
    return t;
  }

  void merge(const VolumeReport& other) {
    for (const auto& [lvl, arr] : other.per_level)
      for (int c = 0; c < 3; ++c) {
        auto& mine = per_level[lvl][c];
        mine.messages += arr[c].messages;
        mine.scalars += arr[c].scalars;
        mine.bytes += arr[c].bytes;
      }
  }

  friend bool operator==(const VolumeReport&, const VolumeReport&) = default;
};

namespace detail {

template <int D>
int face_cell_count(int n) {
  int c = 1;
  for (int d = 0; d < D - 1; ++d) c *= n;
  return c;
}

/// Receiver-view segment of a fine block within its coarse neighbor's face:
/// the fine block's child offset over the interface axes, lowest axis
/// fastest.
template <int D>
int fine_block_segment(const BlockId<D>& fine, Direction dir_from_fine) {
  auto tax = Blockforest<D>::interface_axes(dir_from_fine);
  int seg = 0;
  for (int t = D - 2; t >= 0; --t) seg = seg * 2 + static_cast<int>(fine.coords[tax[t]] & 1);
  return seg;
}

}  // namespace detail

/// Builds the exchange plan for one multigrid level: per leaf and direction,
/// one send and one receive per neighbor entry. Same-level pairs exchange
/// full faces; a coarse block sends one message per segment of its face and
/// receives one per fine neighbor into the matching ghost segment.
template <int D>
ExchangePlan<D> build_plan(const Blockforest<D>& forest, int mg_level) {
  ExchangePlan<D> plan;
  plan.mg_level = mg_level;
  plan.cells = forest.cells_per_block() >> mg_level;
  if (plan.cells << mg_level != forest.cells_per_block() || plan.cells < 1)
    throw std::invalid_argument("build_plan: mg level not allocatable for this block size");
  const int n = plan.cells;
  const int face = detail::face_cell_count<D>(n);
  const int segment_face = detail::face_cell_count<D>(n / 2);

  BlockField<D> proto(forest.cells_per_block(), mg_level);  // index geometry only

  const auto& leaves = forest.leaves();
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    const BlockId<D>& b = leaves[li];
    for (Direction dir : all_directions<D>()) {
      auto nbs = forest.neighbors(b, dir);
      for (const auto& nb : nbs) {
        int nb_leaf = forest.leaf_index(nb.neighbor);
        switch (nb.kase) {
          case RefineCase::same_level:
            plan.sends.push_back({static_cast<int>(li), nb_leaf, dir, RefineCase::same_level, 0, 0,
                                  interface_range(proto, dir), face});
            plan.recvs.push_back({static_cast<int>(li), nb_leaf, dir, RefineCase::same_level, 0,
                                  ghost_face_range(proto, dir), face});
            break;
          case RefineCase::c2f: {
            if (n % 2 != 0)
              throw std::invalid_argument("build_plan: refined interface needs even cell count");
            auto segs = split_interface(interface_range(proto, dir), dir, 2);
            plan.sends.push_back({static_cast<int>(li), nb_leaf, dir, RefineCase::c2f,
                                  nb.segment_index, 0, segs[nb.segment_index], face});
            plan.recvs.push_back({static_cast<int>(li), nb_leaf, dir, RefineCase::f2c,
                                  nb.segment_index,
                                  ghost_segment_range(proto, dir, RefineCase::f2c, nb.segment_index),
                                  segment_face});
            break;
          }
          case RefineCase::f2c: {
            if (n % 2 != 0)
              throw std::invalid_argument("build_plan: refined interface needs even cell count");
            int seg = detail::fine_block_segment<D>(b, dir);
            plan.sends.push_back({static_cast<int>(li), nb_leaf, dir, RefineCase::f2c, 0, seg,
                                  interface_range(proto, dir), segment_face});
            plan.recvs.push_back({static_cast<int>(li), nb_leaf, dir, RefineCase::c2f, 0,
                                  ghost_face_range(proto, dir), face});
            break;
          }
        }
      }
    }
  }

  // match each send to the unique receive expecting it
  std::unordered_map<long long, int> recv_by_key;
  auto key = [&](int dst_leaf, Direction dir, RefineCase kase, int segment, int src_leaf) {
    long long k = dst_leaf;
    k = k * 8 + direction_index(dir);
    k = k * 4 + static_cast<int>(kase);
    k = k * 16 + segment;
    return k * static_cast<long long>(leaves.size() + 1) + src_leaf;
  };
  for (std::size_t i = 0; i < plan.recvs.size(); ++i) {
    const auto& r = plan.recvs[i];
    auto [it, inserted] =
        recv_by_key.emplace(key(r.dst_leaf, r.dir, r.kase, r.segment, r.src_leaf), i);
    if (!inserted) throw std::logic_error("build_plan: duplicate receive descriptor");
  }
  plan.send_to_recv.resize(plan.sends.size());
  std::vector<int> hits(plan.recvs.size(), 0);
  for (std::size_t i = 0; i < plan.sends.size(); ++i) {
    const auto& s = plan.sends[i];
    auto it = recv_by_key.find(
        key(s.dst_leaf, opposite(s.dir), s.kase, s.recv_segment, s.src_leaf));
    if (it == recv_by_key.end()) throw std::logic_error("build_plan: unmatched send descriptor");
    const auto& r = plan.recvs[it->second];
    if (r.payload_len != s.payload_len)
      throw std::logic_error("build_plan: send/receive payload length mismatch");
    plan.send_to_recv[i] = it->second;
    ++hits[it->second];
  }
  for (int h : hits)
    if (h != 1) throw std::logic_error("build_plan: receive descriptor not matched exactly once");
  return plan;
}

/// Closed-form message and scalar counts for one exchange over this plan.
template <int D>
VolumeReport volume_report(const ExchangePlan<D>& plan) {
  const int n = plan.cells;
  VolumeReport report;
  for (const auto& s : plan.sends) {
    long long count = 0;
    switch (s.kase) {
      case RefineCase::same_level: count = detail::face_cell_count<D>(n); break;
      case RefineCase::c2f:
        // r^(D-1) fine values per coarse segment cell = one full fine face
        count = static_cast<long long>(detail::face_cell_count<D>(n / 2)) * (1 << (D - 1));
        break;
      case RefineCase::f2c: count = detail::face_cell_count<D>(n / 2); break;
    }
    report.at(plan.mg_level, s.kase).add(count);
  }
  return report;
}

namespace detail {

template <int D>
void pack_envelope(const Blockforest<D>& forest, const BlockField<D>& f,
                   const SendDescriptor<D>& desc, SchemeOrder scheme, Envelope<D>& env) {
  env.src = forest.leaves()[desc.src_leaf];
  env.dst = forest.leaves()[desc.dst_leaf];
  env.direction = opposite(desc.dir);
  env.kase = desc.kase;
  env.segment_index = desc.recv_segment;
  env.payload.clear();
  env.payload.reserve(desc.payload_len);
  switch (desc.kase) {
    case RefineCase::same_level:
      for_each_cell(desc.source, [&](const IVec<D>& c) { env.payload.push_back(f.at(c)); });
      break;
    case RefineCase::c2f: {
      auto frame = make_frame<D>(desc.dir);
      for_each_cell(desc.source, [&](const IVec<D>& c) {
        auto vals = c2f_compute_fine_values(f, c, frame, scheme);
        env.payload.insert(env.payload.end(), vals.begin(), vals.end());
      });
      break;
    }
    case RefineCase::f2c: f2c_pack(f, desc.dir, env.payload); break;
  }
  if (static_cast<int>(env.payload.size()) != desc.payload_len)
    throw std::logic_error("pack: payload length mismatch");
}

template <int D>
void unpack_envelope(BlockField<D>& f, const RecvDescriptor<D>& desc,
                     const std::vector<real>& payload) {
  if (static_cast<int>(payload.size()) != desc.payload_len)
    throw std::logic_error("unpack: payload length mismatch");
  std::size_t k = 0;
  if (desc.kase == RefineCase::c2f) {
    // fine receiver: sweep the ghost face with a step of r, placing the
    // packed group at the protocol offsets
    auto frame = make_frame<D>(desc.dir);
    auto offsets = c2f_unpack_offsets(frame);
    CellRange<D> bases = desc.ghost;
    for (int d = 0; d < D; ++d)
      if (d != desc.dir.axis) bases.step[d] = 2;
    for_each_cell(bases, [&](const IVec<D>& base) {
      for (const auto& off : offsets) f.at(add(base, off)) = payload[k++];
    });
  } else {
    for_each_cell(desc.ghost, [&](const IVec<D>& c) { f.at(c) = payload[k++]; });
  }
  if (k != payload.size()) throw std::logic_error("unpack: payload not fully consumed");
}

template <class T>
void append_bytes(std::vector<std::byte>& out, const T& v) {
  const auto* p = reinterpret_cast<const std::byte*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T read_bytes(std::span<const std::byte> in, std::size_t& pos) {
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace detail

/// Length-prefixed platform-endian wire form, bit-exact for the scalars.
template <int D>
std::vector<std::byte> serialize(const Envelope<D>& env) {
  std::vector<std::byte> out;
  out.reserve(64 + env.payload.size() * sizeof(real));
  detail::append_bytes(out, env.src.level);
  for (int d = 0; d < D; ++d) detail::append_bytes(out, env.src.coords[d]);
  detail::append_bytes(out, env.dst.level);
  for (int d = 0; d < D; ++d) detail::append_bytes(out, env.dst.coords[d]);
  detail::append_bytes(out, env.direction.axis);
  detail::append_bytes(out, env.direction.sign);
  detail::append_bytes(out, static_cast<int>(env.kase));
  detail::append_bytes(out, env.segment_index);
  detail::append_bytes(out, static_cast<std::uint64_t>(env.payload.size()));
  for (real v : env.payload) detail::append_bytes(out, v);
  return out;
}

template <int D>
Envelope<D> deserialize(std::span<const std::byte> bytes) {
  Envelope<D> env;
  std::size_t pos = 0;
  env.src.level = detail::read_bytes<int>(bytes, pos);
  for (int d = 0; d < D; ++d) env.src.coords[d] = detail::read_bytes<std::int64_t>(bytes, pos);
  env.dst.level = detail::read_bytes<int>(bytes, pos);
  for (int d = 0; d < D; ++d) env.dst.coords[d] = detail::read_bytes<std::int64_t>(bytes, pos);
  env.direction.axis = detail::read_bytes<int>(bytes, pos);
  env.direction.sign = detail::read_bytes<int>(bytes, pos);
  env.kase = static_cast<RefineCase>(detail::read_bytes<int>(bytes, pos));
  env.segment_index = detail::read_bytes<int>(bytes, pos);
  auto count = detail::read_bytes<std::uint64_t>(bytes, pos);
  if (bytes.size() - pos != count * sizeof(real))
    throw std::logic_error("deserialize: truncated envelope");
  env.payload.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) env.payload[i] = detail::read_bytes<real>(bytes, pos);
  return env;
}

/// Delivers every envelope exactly once. Envelopes crossing ranks take the
/// serialize/deserialize path; intra-rank envelopes are moved directly.
/// Both paths yield identical payload bytes.
template <int D>
std::vector<Envelope<D>> route(const Blockforest<D>& forest, std::vector<Envelope<D>> envelopes,
                               std::span<const int> owners, int n_ranks) {
  for (auto& env : envelopes) {
    int src_rank = owners.empty() ? 0 : owners[forest.leaf_index(env.src)];
    int dst_rank = owners.empty() ? 0 : owners[forest.leaf_index(env.dst)];
    if (src_rank < 0 || src_rank >= n_ranks || dst_rank < 0 || dst_rank >= n_ranks)
      throw std::invalid_argument("route: owner rank out of range");
    if (src_rank != dst_rank) {
      auto bytes = serialize(env);
      Envelope<D> delivered = deserialize<D>(bytes);
      if (delivered.payload.size() != env.payload.size() ||
          std::memcmp(delivered.payload.data(), env.payload.data(),
                      env.payload.size() * sizeof(real)) != 0)
        throw std::logic_error("route: serialization round-trip mismatch");
      env = std::move(delivered);
    }
  }
  return envelopes;
}

/// Bulk-synchronous ghost exchange: pack all sends, route, unpack all
/// receives. Packing reads only sender interiors and unpacking writes only
/// disjoint ghost ranges, so the phases cannot interfere and the result is
/// independent of worker count and rank placement.
template <int D>
VolumeReport exchange(const Blockforest<D>& forest, std::span<BlockField<D>> fields,
                      const ExchangePlan<D>& plan, SchemeOrder scheme,
                      std::span<const int> owners = {}, int n_ranks = 1, int workers = 1) {
  const auto& leaves = forest.leaves();
  if (fields.size() != leaves.size())
    throw std::invalid_argument("exchange: missing field for a leaf");
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (fields[i].block() != leaves[i])
      throw std::invalid_argument("exchange: field/leaf mismatch");
    if (fields[i].cells() != plan.cells)
      throw std::invalid_argument("exchange: mg level not allocated on field");
  }
  bool has_refined = false;
  for (const auto& s : plan.sends) has_refined = has_refined || s.kase == RefineCase::c2f;
  if (has_refined && plan.cells < base_count(scheme))
    throw std::invalid_argument("exchange: scheme order needs more cells per dimension");

  std::vector<Envelope<D>> envelopes(plan.sends.size());
  parallel_for(static_cast<long long>(plan.sends.size()), workers, [&](long long i) {
    const auto& desc = plan.sends[i];
    detail::pack_envelope(forest, fields[desc.src_leaf], desc, scheme, envelopes[i]);
  });

  VolumeReport actual;
  for (std::size_t i = 0; i < plan.sends.size(); ++i)
    actual.at(plan.mg_level, plan.sends[i].kase).add(envelopes[i].payload.size());
  if (actual != volume_report(plan))
    throw std::logic_error("exchange: routed volume disagrees with closed-form report");

  envelopes = route(forest, std::move(envelopes), owners, n_ranks);

  parallel_for(static_cast<long long>(plan.sends.size()), workers, [&](long long i) {
    const auto& recv = plan.recvs[plan.send_to_recv[i]];
    detail::unpack_envelope(fields[recv.dst_leaf], recv, envelopes[i].payload);
  });
  return actual;
}

template <int D>
VolumeReport exchange(const Blockforest<D>& forest, std::span<BlockField<D>> fields, int mg_level,
                      SchemeOrder scheme, std::span<const int> owners = {}, int n_ranks = 1,
                      int workers = 1) {
  return exchange(forest, fields, build_plan(forest, mg_level), scheme, owners, n_ranks, workers);
}

}  // namespace octmg
