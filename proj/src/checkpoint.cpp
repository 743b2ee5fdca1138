#include "scr/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <iterator>

namespace scr {

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'C', 'R', 'C', 'K', 'P', 'T', '1'};

std::uint64_t fnv1a(const char* data, std::size_t n, std::uint64_t h = 1469598103934665603ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename T>
void put(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& at, const std::string& path) {
  if (at + sizeof(T) > buf.size()) throw CheckpointError("checkpoint " + path + " is truncated");
  T v;
  std::memcpy(&v, buf.data() + at, sizeof(T));
  at += sizeof(T);
  return v;
}

}  // namespace

const Matrix& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return m;
  }
  throw CheckpointError("checkpoint has no tensor '" + name + "'");
}

void write_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  nlohmann::json header;
  header["metadata"] = checkpoint.metadata;
  auto list = nlohmann::json::array();
  for (const auto& [name, m] : checkpoint.tensors) list.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  header["tensors"] = std::move(list);
  const std::string text = header.dump();

  std::string buf(kMagic.begin(), kMagic.end());
  put<std::uint64_t>(buf, text.size());
  buf += text;
  for (const auto& [name, m] : checkpoint.tensors) {
    buf.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  put<std::uint64_t>(buf, fnv1a(buf.data(), buf.size()));

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw CheckpointError("write failed for checkpoint " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw CheckpointError("cannot move checkpoint into " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < kMagic.size() + 2 * sizeof(std::uint64_t) ||
      !std::equal(kMagic.begin(), kMagic.end(), buf.begin())) {
    throw CheckpointError("checkpoint " + path + " has a bad magic number");
  }
  std::size_t tail = buf.size() - sizeof(std::uint64_t);
  const auto stored = take<std::uint64_t>(buf, tail, path);
  if (stored != fnv1a(buf.data(), buf.size() - sizeof(std::uint64_t))) {
    throw CheckpointError("checkpoint " + path + " is corrupted (checksum mismatch)");
  }

  std::size_t at = kMagic.size();
  const auto header_len = take<std::uint64_t>(buf, at, path);
  if (at + header_len > buf.size()) throw CheckpointError("checkpoint " + path + " is truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.substr(at, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint " + path + " has an unreadable header: " + e.what());
  }
  at += header_len;

  Checkpoint ck;
  ck.metadata = header.value("metadata", nlohmann::json::object());
  for (const auto& t : header.at("tensors")) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    const auto bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
    if (at + bytes > buf.size() - sizeof(std::uint64_t)) throw CheckpointError("checkpoint " + path + " is truncated");
    Matrix m(rows, cols);
    std::memcpy(m.data(), buf.data() + at, bytes);
    at += bytes;
    ck.tensors.emplace_back(t.at("name").get<std::string>(), std::move(m));
  }
  if (at != buf.size() - sizeof(std::uint64_t)) throw CheckpointError("checkpoint " + path + " has trailing bytes");
  return ck;
}

}  // namespace scr
