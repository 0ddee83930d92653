#include "fdm/binio.hpp"
#include "fdm/train.hpp"

namespace fdm {

namespace {

void write_model_config(ByteWriter& w, const ModelConfig& c) {
  w.i32(c.blocks);
  w.i32(c.heads);
  w.i32(c.width);
  w.i32(c.ffn_size);
  w.f64(c.dropout);
  w.u8(c.norm == NormPlacement::kPre ? 0 : 1);
  w.u8(c.tied_embedding ? 1 : 0);
  w.i32(c.seq_len);
  w.i32(c.mem_len);
  w.i32(c.table_size);
  w.i32(c.patch_channels);
  w.i32(c.patch_hidden);
  w.i32(c.norm_groups);
}

ModelConfig read_model_config(ByteReader& r) {
  ModelConfig c;
  c.blocks = r.i32();
  c.heads = r.i32();
  c.width = r.i32();
  c.ffn_size = r.i32();
  c.dropout = r.f64();
  const std::uint8_t norm = r.u8();
  if (norm > 1) r.fail(FormatFault::kCorrupt, "bad norm placement");
  c.norm = norm == 0 ? NormPlacement::kPre : NormPlacement::kPost;
  const std::uint8_t tied = r.u8();
  if (tied > 1) r.fail(FormatFault::kCorrupt, "bad tied-embedding flag");
  c.tied_embedding = tied == 1;
  c.seq_len = r.i32();
  c.mem_len = r.i32();
  c.table_size = r.i32();
  c.patch_channels = r.i32();
  c.patch_hidden = r.i32();
  c.norm_groups = r.i32();
  // Bound sizes before allocating anything from them.
  if (c.blocks > 4096 || c.width > 65536 || c.ffn_size > 1 << 20 || c.seq_len > 1 << 20 ||
      c.patch_hidden > 4096 || c.patch_channels > 64) {
    r.fail(FormatFault::kCorrupt, "model dimensions out of range");
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    r.fail(FormatFault::kCorrupt, e.what());
  }
  return c;
}

void write_tensors(ByteWriter& w, const ModelParams<float>& p, const ModelConfig& cfg) {
  p.visit(cfg, [&](const std::string& name, const auto& t, ParamRole) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rows()));
    w.u32(static_cast<std::uint32_t>(t.cols()));
    w.f32s({t.data(), static_cast<std::size_t>(t.size())});
  });
}

void read_tensors(ByteReader& r, ModelParams<float>& p, const ModelConfig& cfg) {
  p.visit(cfg, [&](const std::string& name, auto& t, ParamRole) {
    const std::size_t at = r.offset();
    const std::string got = r.str(256);
    const std::uint32_t rows = r.u32(), cols = r.u32();
    if (got != name || rows != t.rows() || cols != t.cols()) {
      throw FormatError(FormatFault::kCorrupt, at,
                        "tensor '" + got + "' " + std::to_string(rows) + "x" +
                            std::to_string(cols) + " where '" + name + "' " +
                            std::to_string(t.rows()) + "x" + std::to_string(t.cols()) +
                            " was expected");
    }
    r.f32s({t.data(), static_cast<std::size_t>(t.size())});
  });
}

}  // namespace

std::string serialize_checkpoint(const TrainState& s) {
  ByteWriter w;
  w.header("FDMC", kCheckpointVersion);
  write_model_config(w, s.model);
  w.u64(static_cast<std::uint64_t>(s.step));
  w.u64(s.seed);
  for (std::uint64_t x : s.rng.state().s) w.u64(x);
  w.u64(static_cast<std::uint64_t>(s.opt.step));
  write_tensors(w, s.params, s.model);
  write_tensors(w, s.opt.m, s.model);
  write_tensors(w, s.opt.v, s.model);
  return w.take();
}

TrainState parse_checkpoint(std::string_view bytes) {
  ByteReader r(bytes);
  r.header("FDMC", kCheckpointVersion);
  TrainState s;
  s.model = read_model_config(r);
  s.step = static_cast<std::int64_t>(r.u64());
  s.seed = r.u64();
  Rng::State st;
  for (auto& x : st.s) x = r.u64();
  s.rng.set_state(st);
  s.opt.step = static_cast<std::int64_t>(r.u64());
  s.params = zeros_like<float>(s.model);
  s.opt.m = zeros_like<float>(s.model);
  s.opt.v = zeros_like<float>(s.model);
  read_tensors(r, s.params, s.model);
  read_tensors(r, s.opt.m, s.model);
  read_tensors(r, s.opt.v, s.model);
  if (!r.at_end()) r.fail(FormatFault::kCorrupt, "trailing bytes after checkpoint");
  return s;
}

void checkpoint_save(const std::filesystem::path& path, const TrainState& state) {
  write_file(path, serialize_checkpoint(state));
}

TrainState checkpoint_load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint missing: " + path.string());
  return parse_checkpoint(read_file(path));
}

}  // namespace fdm
