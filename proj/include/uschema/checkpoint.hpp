#pragma once

// Checkpoint format. A text header followed by raw payloads:
//
//   uschema-checkpoint<TAB>1
//   dtype<TAB>f32|f64
//   config<TAB>N        then N key=value lines
//   pairs<TAB>N         then N "subject<TAB>object" lines
//   relations<TAB>N     then N "kb|text<TAB>key" lines
//   vocab<TAB>N         then N "language<TAB>token<TAB>count<TAB>canonical" lines
//   blocks<TAB>N        then N "name<TAB>rows<TAB>cols" lines
//   data
//
// Payloads follow in block order, row-major, little-endian IEEE floats.
// Writing a checkpoint that was just read reproduces it byte for byte.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "uschema/model.hpp"

namespace uschema {

inline constexpr std::string_view kCheckpointMagic = "uschema-checkpoint";
inline constexpr int kCheckpointVersion = 1;

template <class T>
constexpr std::string_view dtype_name() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? "f32" : "f64";
}

namespace detail {

template <class T>
void write_le(std::ostream& out, std::span<const T> values) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  std::vector<unsigned char> buf(values.size() * sizeof(T));
  for (std::size_t i = 0; i < values.size(); ++i) {
    U bits = std::bit_cast<U>(values[i]);
    for (std::size_t b = 0; b < sizeof(T); ++b) buf[i * sizeof(T) + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
}

template <class T>
void read_le(std::istream& in, std::span<T> values) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  std::vector<unsigned char> buf(values.size() * sizeof(T));
  in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
  if (std::size_t(in.gcount()) != buf.size()) throw std::runtime_error("checkpoint payload truncated");
  for (std::size_t i = 0; i < values.size(); ++i) {
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) bits |= U(buf[i * sizeof(T) + b]) << (8 * b);
    values[i] = std::bit_cast<T>(bits);
  }
}

}  // namespace detail

template <class T>
void write_checkpoint(const Model<T>& model, std::ostream& out) {
  out << kCheckpointMagic << '\t' << kCheckpointVersion << '\n';
  out << "dtype\t" << dtype_name<T>() << '\n';
  const auto cfg = to_text(model.config);
  out << "config\t" << std::count(cfg.begin(), cfg.end(), '\n') << '\n' << cfg;
  out << "pairs\t" << model.pairs.size() << '\n';
  for (const auto& p : model.pairs) out << p << '\n';
  out << "relations\t" << model.relations.size() << '\n';
  for (std::size_t i = 0; i < model.relations.size(); ++i)
    out << (model.relation_is_kb[i] ? "kb" : "text") << '\t' << model.relations[i] << '\n';
  out << "vocab\t" << model.vocab.size() << '\n';
  for (std::size_t i = 0; i < model.vocab.size(); ++i) {
    const auto& e = model.vocab.entry(i);
    out << e.language << '\t' << e.token << '\t' << e.count << '\t' << model.vocab.canonical(i) << '\n';
  }
  out << "blocks\t" << model.params.blocks().size() << '\n';
  for (const auto& b : model.params.blocks()) out << b.name << '\t' << b.value.rows() << '\t' << b.value.cols() << '\n';
  out << "data\n";
  for (const auto& b : model.params.blocks()) detail::write_le<T>(out, b.value.values());
}

template <class T>
void write_checkpoint(const Model<T>& model, const std::string& path) {
  auto out = open_output(path, true);
  write_checkpoint(model, out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

template <class T>
std::string checkpoint_bytes(const Model<T>& model) {
  std::ostringstream out(std::ios::binary);
  write_checkpoint(model, out);
  return out.str();
}

/// Reads a checkpoint stored with scalar type T. Malformed headers raise
/// ParseError with the header line number.
template <class T>
Model<T> read_checkpoint(std::istream& in, const std::string& origin = "<checkpoint>") {
  std::size_t line_no = 0;
  auto next = [&](std::string& line) {
    if (!std::getline(in, line)) throw ParseError(origin, line_no + 1, "unexpected end of header");
    ++line_no;
  };
  auto section = [&](std::string_view name) -> std::size_t {
    std::string line;
    next(line);
    auto cols = split(line, '\t');
    long long n = 0;
    if (cols.size() != 2 || cols[0] != name || !parse_long(cols[1], n) || n < 0)
      throw ParseError(origin, line_no, "expected section '" + std::string(name) + "'");
    return std::size_t(n);
  };

  std::string line;
  next(line);
  if (line != std::string(kCheckpointMagic) + "\t" + std::to_string(kCheckpointVersion))
    throw ParseError(origin, line_no, "not a version-" + std::to_string(kCheckpointVersion) + " checkpoint");
  next(line);
  if (line != "dtype\t" + std::string(dtype_name<T>()))
    throw ParseError(origin, line_no, "dtype mismatch: expected " + std::string(dtype_name<T>()));

  Model<T> model;
  std::string cfg;
  for (std::size_t i = 0, n = section("config"); i < n; ++i) {
    next(line);
    cfg += line + "\n";
  }
  model.config = parse_config_text(cfg, origin, TrainConfig{});

  std::vector<std::string> pairs;
  for (std::size_t i = 0, n = section("pairs"); i < n; ++i) {
    next(line);
    pairs.push_back(line);
  }
  std::vector<std::string> relations;
  std::vector<bool> is_kb;
  for (std::size_t i = 0, n = section("relations"); i < n; ++i) {
    next(line);
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(origin, line_no, "bad relation line");
    const auto kind = line.substr(0, tab);
    if (kind != "kb" && kind != "text") throw ParseError(origin, line_no, "bad relation kind");
    is_kb.push_back(kind == "kb");
    relations.push_back(line.substr(tab + 1));
  }
  std::vector<std::size_t> canon;
  for (std::size_t i = 0, n = section("vocab"); i < n; ++i) {
    next(line);
    auto cols = split(line, '\t');
    long long count = 0, c = 0;
    if (cols.size() != 4 || !parse_long(cols[2], count) || !parse_long(cols[3], c) || c < 0 || std::size_t(c) >= n)
      throw ParseError(origin, line_no, "bad vocab line");
    if (model.vocab.add(cols[0], cols[1], count) != i) throw ParseError(origin, line_no, "duplicate vocab entry");
    canon.push_back(std::size_t(c));
  }
  for (std::size_t i = 0; i < canon.size(); ++i) model.vocab.set_canonical(i, canon[i]);

  model.allocate(std::move(pairs), std::move(relations), std::move(is_kb));
  const std::size_t nblocks = section("blocks");
  if (nblocks != model.params.blocks().size()) throw ParseError(origin, line_no, "block count mismatch");
  for (auto& b : model.params.blocks()) {
    next(line);
    auto cols = split(line, '\t');
    long long r = 0, c = 0;
    if (cols.size() != 3 || cols[0] != b.name || !parse_long(cols[1], r) || !parse_long(cols[2], c) ||
        std::size_t(r) != b.value.rows() || std::size_t(c) != b.value.cols())
      throw ParseError(origin, line_no, "block '" + b.name + "' missing or mis-shaped");
  }
  next(line);
  if (line != "data") throw ParseError(origin, line_no, "expected 'data'");
  for (auto& b : model.params.blocks()) detail::read_le<T>(in, b.value.values());
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error(origin + ": trailing bytes after payload");
  return model;
}

template <class T>
Model<T> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_checkpoint<T>(in, path);
}

}  // namespace uschema
