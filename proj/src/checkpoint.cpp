#include "uda/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "uda/errors.hpp"

namespace uda {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr std::array<char, 8> kMagic{'U', 'D', 'A', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

class Reader {
 public:
  Reader(std::ifstream& in, const std::string& path) : in_(in), path_(path) {}

  template <typename T>
  T get() {
    T v{};
    read(&v, sizeof v);
    return v;
  }
  std::string string(std::size_t n) {
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void read(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (!in_) throw LoadError(path_ + ": truncated checkpoint");
  }

 private:
  std::ifstream& in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const UdaModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write checkpoint " + path.string());
  const std::string text = model_config_text(model.config());
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, fnv1a(text));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto& entries = model.parameters().entries();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, v] : entries) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Shape s = v.shape();
    for (int d : {s.n, s.c, s.h, s.w}) put<std::int32_t>(out, d);
    const auto values = v.value().values();
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  }
  if (!out) throw LoadError("failed writing checkpoint " + path.string());
}

std::unique_ptr<UdaModel> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  Reader r(in, path.string());
  std::array<char, 8> magic{};
  r.read(magic.data(), magic.size());
  if (magic != kMagic) throw LoadError(path.string() + ": not a checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw LoadError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto fingerprint = r.get<std::uint64_t>();
  const std::string text = r.string(r.get<std::uint32_t>());
  if (fnv1a(text) != fingerprint) throw LoadError(path.string() + ": config fingerprint mismatch");
  auto model = std::make_unique<UdaModel>(parse_model_config(text));
  auto& entries = model->parameters().entries();
  const auto count = r.get<std::uint32_t>();
  if (count != entries.size()) {
    throw LoadError(path.string() + ": expected " + std::to_string(entries.size()) +
                    " arrays, found " + std::to_string(count));
  }
  for (const auto& [name, v] : entries) {
    const std::string stored = r.string(r.get<std::uint32_t>());
    if (stored != name) throw LoadError(path.string() + ": expected array '" + name + "', found '" + stored + "'");
    Shape s{};
    s.n = r.get<std::int32_t>();
    s.c = r.get<std::int32_t>();
    s.h = r.get<std::int32_t>();
    s.w = r.get<std::int32_t>();
    if (s.str() != v.shape().str()) {
      throw LoadError(path.string() + ": array '" + name + "' has shape " + s.str() +
                      ", expected " + v.shape().str());
    }
    Var handle = v;
    auto values = handle.mutable_value().values();
    r.read(values.data(), values.size() * sizeof(double));
  }
  return model;
}

}  // namespace uda
