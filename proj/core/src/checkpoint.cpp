#include "biresnet/checkpoint.hpp"

#include <numeric>

#include "biresnet/io_util.hpp"

namespace biresnet {

namespace {
constexpr char kMagic[4] = {'B', 'R', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path) {
  detail::atomic_write(path, [&](detail::BinWriter& w) {
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(ckpt.entries.size()));
    for (const auto& e : ckpt.entries) {
      w.u16(static_cast<std::uint16_t>(e.name.size()));
      w.str(e.name);
      w.u8(static_cast<std::uint8_t>(e.dims.size()));
      for (std::uint32_t d : e.dims) w.u32(d);
      w.f32s(e.values);
    }
    w.u8(ckpt.has_adam ? 1 : 0);
    if (ckpt.has_adam) {
      for (const auto& e : ckpt.entries) {
        w.f32s(e.adam_m);
        w.f32s(e.adam_v);
        w.u64(e.step_count);
      }
    }
  });
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  detail::BinReader r(path);
  const std::string magic = r.str(4);
  if (magic != std::string(kMagic, 4)) {
    throw DataError("bad checkpoint magic in " + path.string());
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " +
                    std::to_string(version) + " in " + path.string());
  }
  Checkpoint ckpt;
  const std::uint32_t count = r.u32();
  ckpt.entries.resize(count);
  for (auto& e : ckpt.entries) {
    e.name = r.str(r.u16());
    const std::uint8_t rank = r.u8();
    std::size_t total = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
      e.dims.push_back(r.u32());
      total *= e.dims.back();
    }
    e.values = r.f32s(total);
  }
  ckpt.has_adam = r.u8() != 0;
  if (ckpt.has_adam) {
    for (auto& e : ckpt.entries) {
      e.adam_m = r.f32s(e.values.size());
      e.adam_v = r.f32s(e.values.size());
      e.step_count = r.u64();
    }
  }
  return ckpt;
}

}  // namespace biresnet
