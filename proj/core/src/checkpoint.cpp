#include "rankformer/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace rankformer {

namespace {

constexpr char kMagic[4] = {'R', 'K', 'F', '1'};

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
         (static_cast<std::uint32_t>(buf[2]) << 16) | (static_cast<std::uint32_t>(buf[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Mat& z, Index n, Index m,
                     const std::map<std::string, std::string>& manifest) {
  if (z.rows() != n + m) throw std::invalid_argument("checkpoint: rows != n+m");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out.write(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(n));
  put_u32(out, static_cast<std::uint32_t>(m));
  put_u32(out, static_cast<std::uint32_t>(z.cols()));
  std::vector<float> row(static_cast<std::size_t>(z.cols()));
  for (Index r = 0; r < z.rows(); ++r) {
    for (Index c = 0; c < z.cols(); ++c) row[static_cast<std::size_t>(c)] = static_cast<float>(z(r, c));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("short write: " + path.string());
  out.close();

  std::ofstream man(path.string() + ".manifest", std::ios::trunc);
  if (!man) throw std::runtime_error("cannot write manifest for " + path.string());
  man << "n=" << n << "\nm=" << m << "\nd=" << z.cols() << "\n";
  for (const auto& [key, value] : manifest) man << key << "=" << value << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("bad checkpoint magic in " + path.string());
  }
  Checkpoint ckpt;
  ckpt.n = get_u32(in);
  ckpt.m = get_u32(in);
  const Index d = get_u32(in);
  ckpt.z.resize(ckpt.n + ckpt.m, d);
  std::vector<float> row(static_cast<std::size_t>(d));
  for (Index r = 0; r < ckpt.z.rows(); ++r) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path.string());
    for (Index c = 0; c < d; ++c) ckpt.z(r, c) = static_cast<double>(row[static_cast<std::size_t>(c)]);
  }
  return ckpt;
}

std::map<std::string, std::string> load_manifest(const std::filesystem::path& checkpoint_path) {
  std::ifstream in(checkpoint_path.string() + ".manifest");
  if (!in) throw std::runtime_error("cannot open manifest for " + checkpoint_path.string());
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

}  // namespace rankformer
