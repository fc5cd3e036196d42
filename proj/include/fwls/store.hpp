#ifndef FWLS_STORE_HPP
#define FWLS_STORE_HPP

// Persistence of GramState and extension of a stored state by a new model or
// meta-feature.
//
// State file, version 1, all fields little-endian:
//
//   offset  size  field
//        0     4  magic "FWLS"
//        4     4  u32 version
//        8     4  u32 L (models)
//       12     4  u32 M (meta-features)
//       16     8  u64 N (rows)
//       24     8  u64 row fingerprint
//       32     8  f64 lambda hint
//       40   8*T  f64 lower triangle of A^T A, T = D(D+1)/2, row-major,
//                 canonical column order (D = M*L)
//        .   8*D  f64 A^T y
//        .     8  f64 y^T y
//        .     4  u32 CRC-32 of every preceding byte

#include <zlib.h>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "fwls/core.hpp"
#include "fwls/gram.hpp"
#include "fwls/ridge.hpp"

namespace fwls::store {

inline constexpr std::array<char, 4> kMagic = {'F', 'W', 'L', 'S'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 40;
inline constexpr std::size_t kCrcBytes = 4;

inline constexpr std::size_t file_size(std::size_t dim) {
  return kHeaderBytes + 8 * (linalg::packed_size(dim) + dim + 1) + kCrcBytes;
}

struct StoredState {
  GramState state;
  double lambda_hint = 0.0;
};

inline std::uint32_t crc32_of(std::span<const unsigned char> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in slices.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

namespace detail {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    auto b = static_cast<const unsigned char*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out_.push_back(static_cast<unsigned char>(v >> (8 * k)));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out_.push_back(static_cast<unsigned char>(v >> (8 * k)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<unsigned char>& buffer() { return out_; }

 private:
  std::vector<unsigned char> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> in) : in_(in) {}
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= std::uint32_t(in_[pos_ + k]) << (8 * k);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= std::uint64_t(in_[pos_ + k]) << (8 * k);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }

 private:
  std::span<const unsigned char> in_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<unsigned char> encode(const GramState& gs, double lambda_hint = 0.0) {
  detail::Writer w;
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(gs.mapping.n_models()));
  w.u32(static_cast<std::uint32_t>(gs.mapping.n_features()));
  w.u64(gs.n_rows);
  w.u64(gs.fingerprint);
  w.f64(lambda_hint);
  for (double x : gs.lower) w.f64(x);
  for (double x : gs.xty) w.f64(x);
  w.f64(gs.yty);
  w.u32(crc32_of(w.buffer()));
  return std::move(w.buffer());
}

inline StoredState decode(std::span<const unsigned char> bytes) {
  if (bytes.size() < kMagic.size() ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
    throw BadMagic("state file: missing FWLS magic");
  if (bytes.size() < kHeaderBytes)
    throw CorruptFile("state file: truncated header (" + std::to_string(bytes.size()) +
                      " bytes)");
  detail::Reader r(bytes.subspan(kMagic.size()));
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw UnsupportedVersion("state file: version " + std::to_string(version) +
                             " is not supported (expected " + std::to_string(kVersion) +
                             ")");
  const std::uint32_t L = r.u32();
  const std::uint32_t M = r.u32();
  if (L == 0 || M == 0 || L > 65536 || M > 65536 ||
      std::uint64_t(L) * M > 1'000'000)
    throw CorruptFile("state file: implausible dimensions L=" + std::to_string(L) +
                      ", M=" + std::to_string(M));
  const std::size_t dim = std::size_t(L) * M;
  if (bytes.size() != file_size(dim))
    throw CorruptFile("state file: expected " + std::to_string(file_size(dim)) +
                      " bytes for L=" + std::to_string(L) + ", M=" + std::to_string(M) +
                      ", found " + std::to_string(bytes.size()));
  const std::size_t payload = bytes.size() - kCrcBytes;
  detail::Reader crc_reader(bytes.subspan(payload));
  if (crc_reader.u32() != crc32_of(bytes.first(payload)))
    throw CorruptFile("state file: CRC mismatch");

  StoredState out;
  out.state = GramState(DesignMapping(L, M));
  out.state.n_rows = r.u64();
  out.state.fingerprint = r.u64();
  out.lambda_hint = r.f64();
  for (double& x : out.state.lower) x = r.f64();
  for (double& x : out.state.xty) x = r.f64();
  out.state.yty = r.f64();
  return out;
}

/// Writes to a temporary sibling and renames it over `path`.
inline void save(const GramState& gs, const std::filesystem::path& path,
                 double lambda_hint = 0.0) {
  const auto bytes = encode(gs, lambda_hint);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("save: cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw StoreError("save: write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw StoreError("save: cannot move state into " + path.string() + ": " + ec.message());
  }
}

inline StoredState read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("load: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode(bytes);
}

inline GramState load(const std::filesystem::path& path) { return read(path).state; }

// ---------------------------------------------------------------------------
// Extension by re-streaming the original rows

namespace detail {

inline void check_alignment(const GramState& gs, const StackedDataset& ds,
                            std::size_t new_values) {
  if (!(ds.mapping() == gs.mapping))
    throw ContractViolation("extend: dataset has L=" + std::to_string(ds.n_models()) +
                            ", M=" + std::to_string(ds.n_features()) +
                            " but the state has L=" +
                            std::to_string(gs.mapping.n_models()) + ", M=" +
                            std::to_string(gs.mapping.n_features()));
  if (ds.n_rows() != gs.n_rows || new_values != gs.n_rows)
    throw AlignmentMismatch("extend: state covers " + std::to_string(gs.n_rows) +
                            " rows, dataset has " + std::to_string(ds.n_rows()) +
                            " and the new column has " + std::to_string(new_values));
  if (fingerprint::of(ds) != gs.fingerprint)
    throw AlignmentMismatch(
        "extend: dataset row fingerprint differs from the stored state; rows are "
        "not the ones the state was accumulated from, or not in the same order");
}

inline std::size_t pair_index(std::size_t a, std::size_t b) {
  return a >= b ? linalg::tri(a, b) : linalg::tri(b, a);
}

/// Shared kernel. For a new model h, "outer" indexes meta-features and
/// "inner" indexes models: cross[(i, j), k] = sum g_i * (f_j f_k h). For a
/// new meta-feature e the roles swap: cross[(i, j), k] = sum f_j * (g_i g_k e).
/// Both are symmetric in the pair over the outer index, so each row costs
/// inner * outer(outer+1)/2 multiply-adds.
inline ColumnBlocks new_column_blocks(const GramState& gs, const StackedDataset& ds,
                                      std::span<const double> values,
                                      ExtensionKind kind) {
  check_alignment(gs, ds, values.size());
  const DesignMapping& m = gs.mapping;
  const bool model = kind == ExtensionKind::NewModel;
  const std::size_t outer = model ? m.n_features() : m.n_models();
  const std::size_t inner = model ? m.n_models() : m.n_features();
  const std::size_t pairs = linalg::packed_size(outer);

  std::vector<double> sums(inner * pairs, 0.0), chunk_sums(inner * pairs, 0.0);
  std::vector<double> corner(pairs, 0.0), chunk_corner(pairs, 0.0);
  std::vector<double> nxty(outer, 0.0), chunk_nxty(outer, 0.0);
  std::vector<double> w(pairs);
  std::uint64_t madds = 0;
  std::size_t in_chunk = 0;

  auto fold = [&] {
    for (std::size_t k = 0; k < sums.size(); ++k) sums[k] += chunk_sums[k];
    for (std::size_t k = 0; k < pairs; ++k) corner[k] += chunk_corner[k];
    for (std::size_t k = 0; k < outer; ++k) nxty[k] += chunk_nxty[k];
    std::fill(chunk_sums.begin(), chunk_sums.end(), 0.0);
    std::fill(chunk_corner.begin(), chunk_corner.end(), 0.0);
    std::fill(chunk_nxty.begin(), chunk_nxty.end(), 0.0);
    in_chunk = 0;
  };

  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    const double v = values[r];
    if (!std::isfinite(v))
      throw NonFiniteValue("extend: non-finite new value in row " + std::to_string(r));
    auto o = model ? ds.f(r) : ds.g(r);
    auto in = model ? ds.g(r) : ds.f(r);
    for (std::size_t a = 0; a < outer; ++a) {
      const double ov = o[a] * v;
      for (std::size_t b = 0; b <= a; ++b) {
        w[linalg::tri(a, b)] = ov * o[b];
        chunk_corner[linalg::tri(a, b)] += ov * o[b] * v;
      }
      chunk_nxty[a] += ov * ds.y(r);
    }
    for (std::size_t i = 0; i < inner; ++i) {
      const double x = in[i];
      double* dst = chunk_sums.data() + i * pairs;
      for (std::size_t p = 0; p < pairs; ++p) dst[p] += x * w[p];
    }
    madds += inner * pairs + pairs;
    if (++in_chunk == GramAccumulator::kDefaultChunkRows) fold();
  }
  fold();

  ColumnBlocks b;
  b.kind = kind;
  b.d_old = m.dim();
  b.d_new = outer;
  b.n_rows = gs.n_rows;
  b.new_xty = std::move(nxty);
  b.cross.assign(b.d_old * b.d_new, 0.0);
  b.corner.assign(b.d_new * b.d_new, 0.0);
  for (std::size_t c = 0; c < m.dim(); ++c) {
    auto [i, j] = m.split(c);
    const std::size_t in_idx = model ? i : j;
    const std::size_t out_idx = model ? j : i;
    for (std::size_t k = 0; k < outer; ++k)
      b.cross[c * outer + k] = sums[in_idx * pairs + pair_index(out_idx, k)];
  }
  for (std::size_t k = 0; k < outer; ++k)
    for (std::size_t l = 0; l < outer; ++l) b.corner[k * outer + l] = corner[pair_index(k, l)];
  b.multiply_adds = madds;
  return b;
}

}  // namespace detail

/// Blocks for a new model whose per-row predictions are `predictions`.
inline ColumnBlocks model_blocks(const GramState& gs, const StackedDataset& ds,
                                 std::span<const double> predictions) {
  return detail::new_column_blocks(gs, ds, predictions, ExtensionKind::NewModel);
}

/// Blocks for a new meta-feature whose per-row values are `values`.
inline ColumnBlocks feature_blocks(const GramState& gs, const StackedDataset& ds,
                                   std::span<const double> values) {
  return detail::new_column_blocks(gs, ds, values, ExtensionKind::NewFeature);
}

/// Adds model L (0-based) to a stored state. `ds` must be the rows the state
/// was accumulated from, in the same order; only products involving the new
/// model are computed, O(N M^2 L).
inline GramState extend_with_model(const GramState& gs, std::span<const double> predictions,
                                   const StackedDataset& ds) {
  return extend_columns(gs, model_blocks(gs, ds, predictions));
}

/// Adds meta-feature M (0-based); O(N M L^2).
inline GramState extend_with_feature(const GramState& gs, std::span<const double> values,
                                     const StackedDataset& ds) {
  return extend_columns(gs, feature_blocks(gs, ds, values));
}

}  // namespace fwls::store

#endif  // FWLS_STORE_HPP
