#include "fsmb/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "fsmb/dataset.hpp"  // read/write_text_file

namespace fsmb {

namespace {

constexpr std::uint32_t kVersion = 1;

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }
void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  std::string what;

  void need(std::size_t n, const char* field) {
    if (pos + n > buf.size()) throw FormatError(what + ": truncated in " + field, pos);
  }
  std::uint8_t u8(const char* field) {
    need(1, field);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* field) {
    need(8, field);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  float f32(const char* field) { return std::bit_cast<float>(u32(field)); }
  double f64(const char* field) { return std::bit_cast<double>(u64(field)); }
};

void put_floats(std::string& out, const std::vector<float>& v) {
  for (float f : v) put_f32(out, f);
}

std::vector<float> get_floats(Reader& r, std::size_t n, const char* field) {
  std::vector<float> v(n);
  for (auto& f : v) f = r.f32(field);
  return v;
}

void write_model(std::string& out, const Encoder& enc, const std::optional<TauState>& tau,
                 const std::optional<ClassifierHead>& head) {
  put_u32(out, static_cast<std::uint32_t>(enc.dims.size()));
  for (auto d : enc.dims) put_u32(out, d);
  for (std::size_t i = 0; i < enc.weights.size(); ++i) {
    put_floats(out, enc.weights[i].values());
    put_floats(out, enc.biases[i].values());
  }
  put_u8(out, tau ? 1 : 0);
  if (tau) {
    put_u8(out, tau->metric == Metric::cosine ? 0 : 1);
    put_f32(out, tau->value);
  }
  put_u8(out, head ? 1 : 0);
  if (head) {
    const bool is_linear = std::holds_alternative<LinearHead>(*head);
    put_u8(out, is_linear ? 0 : 1);
    if (is_linear) {
      const auto& h = std::get<LinearHead>(*head);
      put_u32(out, static_cast<std::uint32_t>(h.weight.rows()));
      put_u32(out, static_cast<std::uint32_t>(h.weight.cols()));
      put_floats(out, h.weight.values());
      put_floats(out, h.bias.values());
    } else {
      const auto& h = std::get<CosineHead>(*head);
      put_u32(out, static_cast<std::uint32_t>(h.weight.rows()));
      put_u32(out, static_cast<std::uint32_t>(h.weight.cols()));
      put_floats(out, h.weight.values());
      put_f32(out, h.tau_cls.item());
    }
  }
}

void read_model(Reader& r, Encoder& enc, std::optional<TauState>& tau,
                std::optional<ClassifierHead>& head) {
  const std::uint32_t n_dims = r.u32("n_dims");
  if (n_dims < 2) throw FormatError(r.what + ": encoder needs at least 2 dims", r.pos);
  enc.dims.resize(n_dims);
  for (auto& d : enc.dims) d = r.u32("dims");
  enc.weights.clear();
  enc.biases.clear();
  for (std::size_t i = 0; i + 1 < enc.dims.size(); ++i) {
    const std::size_t out_d = enc.dims[i + 1], in_d = enc.dims[i];
    enc.weights.push_back(Tensor::from_values({out_d, in_d}, get_floats(r, out_d * in_d, "weight"))
                              .set_requires_grad(true));
    enc.biases.push_back(
        Tensor::from_values({out_d}, get_floats(r, out_d, "bias")).set_requires_grad(true));
  }
  if (r.u8("has_tau")) {
    TauState t;
    t.metric = r.u8("tau_metric") == 0 ? Metric::cosine : Metric::sq_euclidean;
    t.value = r.f32("tau");
    tau = t;
  }
  if (r.u8("has_head")) {
    const std::uint8_t kind = r.u8("head_kind");
    const std::size_t rows = r.u32("head_rows");
    const std::size_t cols = r.u32("head_cols");
    if (kind == 0) {
      LinearHead h;
      h.weight = Tensor::from_values({rows, cols}, get_floats(r, rows * cols, "head_weight"))
                     .set_requires_grad(true);
      h.bias = Tensor::from_values({rows}, get_floats(r, rows, "head_bias")).set_requires_grad(true);
      head = h;
    } else if (kind == 1) {
      CosineHead h;
      h.weight = Tensor::from_values({rows, cols}, get_floats(r, rows * cols, "head_weight"))
                     .set_requires_grad(true);
      h.tau_cls = Tensor::scalar(r.f32("head_tau")).set_requires_grad(true);
      head = h;
    } else {
      throw FormatError(r.what + ": unknown head kind " + std::to_string(kind), r.pos - 1);
    }
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::string out;
  out += "FSCK";
  put_u32(out, kVersion);
  write_model(out, ck.encoder, ck.tau, ck.head);
  put_u8(out, ck.train ? 1 : 0);
  if (ck.train) {
    const TrainState& t = *ck.train;
    put_u8(out, t.stage);
    put_u64(out, t.seed);
    put_u32(out, t.next_epoch);
    put_u32(out, static_cast<std::uint32_t>(t.velocities.size()));
    for (const auto& v : t.velocities) {
      put_u32(out, static_cast<std::uint32_t>(v.size()));
      put_floats(out, v);
    }
    put_f64(out, t.best_val_acc);
    put_u32(out, t.best_epoch);
    put_u8(out, t.has_best ? 1 : 0);
    if (t.has_best) write_model(out, t.best_encoder, t.best_tau, t.best_head);
  }
  write_text_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string buf = read_text_file(path);
  Reader r{buf, 0, "checkpoint '" + path + "'"};
  r.need(4, "magic");
  if (buf.compare(0, 4, "FSCK") != 0) throw FormatError(r.what + ": bad magic", 0);
  r.pos = 4;
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) {
    throw FormatError(r.what + ": unsupported version " + std::to_string(version), 4);
  }

  Checkpoint ck;
  read_model(r, ck.encoder, ck.tau, ck.head);
  if (r.u8("has_train")) {
    TrainState t;
    t.stage = r.u8("stage");
    t.seed = r.u64("seed");
    t.next_epoch = r.u32("next_epoch");
    const std::uint32_t n_vel = r.u32("n_velocities");
    t.velocities.resize(n_vel);
    for (auto& v : t.velocities) v = get_floats(r, r.u32("velocity_len"), "velocity");
    t.best_val_acc = r.f64("best_val_acc");
    t.best_epoch = r.u32("best_epoch");
    t.has_best = r.u8("has_best") != 0;
    if (t.has_best) read_model(r, t.best_encoder, t.best_tau, t.best_head);
    ck.train = std::move(t);
  }
  if (r.pos != buf.size()) throw FormatError(r.what + ": trailing bytes", r.pos);
  return ck;
}

}  // namespace fsmb
