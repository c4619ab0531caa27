#include "flycoo/factor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "flycoo/error.hpp"

namespace flycoo {
namespace {

static_assert(std::endian::native == std::endian::little, "factor dumps assume a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error("truncated factor dump");
  return v;
}

}  // namespace

void write_factor_dump(std::ostream& out, const FactorSet& factors) {
  out.write(kFactorMagic, 4);
  put<std::uint32_t>(out, kFactorDumpVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(factors.num_modes()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(factors.rank()));
  for (const auto& f : factors.factors) put<std::uint64_t>(out, f.rows());
  for (const auto& f : factors.factors)
    out.write(reinterpret_cast<const char*>(f.data().data()),
              static_cast<std::streamsize>(f.data().size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(factors.lambdas.data()),
            static_cast<std::streamsize>(factors.lambdas.size() * sizeof(double)));
  if (!out) throw Error("factor dump write failed");
}

FactorSet read_factor_dump(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kFactorMagic, 4) != 0)
    throw Error("not a factor dump (bad magic)");
  if (get<std::uint32_t>(in) != kFactorDumpVersion) throw Error("unsupported factor dump version");
  const auto n = get<std::uint32_t>(in);
  const auto rank = get<std::uint32_t>(in);
  std::vector<std::uint64_t> dims(n);
  for (auto& d : dims) d = get<std::uint64_t>(in);
  FactorSet set;
  for (auto d : dims) {
    FactorMatrix f(d, rank);
    if (!in.read(reinterpret_cast<char*>(f.data().data()),
                 static_cast<std::streamsize>(f.data().size() * sizeof(double))))
      throw Error("truncated factor dump");
    set.factors.push_back(std::move(f));
  }
  set.lambdas.resize(rank);
  if (!in.read(reinterpret_cast<char*>(set.lambdas.data()),
               static_cast<std::streamsize>(rank * sizeof(double))))
    throw Error("truncated factor dump");
  return set;
}

void write_factor_dump_file(const std::string& path, const FactorSet& factors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_factor_dump(out, factors);
}

FactorSet read_factor_dump_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_factor_dump(in);
}

}  // namespace flycoo
