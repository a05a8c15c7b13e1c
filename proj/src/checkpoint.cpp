#include "lextree/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace lextree {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[8] = {'L', 'X', 'T', 'C', 'K', 'P', 'T', '\0'};
constexpr char kTrailer[4] = {'E', 'N', 'D', '\0'};

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <class T>
  void pod(T v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

 private:
  std::ofstream& out_;
};

// Reads from an in-memory copy so that every length is checked against what
// is actually left.
class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  }
  template <class T>
  T pod(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::string str(const char* what) {
    const auto n = pod<std::uint32_t>(what);
    need(n, what);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* p, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

std::string bool_str(bool b) { return b ? "true" : "false"; }

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw CheckpointError("config " + key + ": expected true/false, got '" + v + "'");
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const auto n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw CheckpointError("config " + key + ": expected an integer, got '" + v + "'");
  }
}

}  // namespace

std::map<std::string, std::string> config_record(const ModelConfig& c) {
  return {
      {"variant", std::string(variant_name(c.variant))},
      {"embed_dim", std::to_string(c.embed_dim)},
      {"hidden_dim", std::to_string(c.hidden_dim)},
      {"output_hidden", std::to_string(c.output_hidden)},
      {"num_classes", std::to_string(c.num_classes)},
      {"strategy", std::string(strategy_name(c.strategy))},
      {"split_forget_projection", bool_str(c.split_forget_projection)},
      {"literal_topdown", bool_str(c.literal_topdown)},
      {"regularize_embeddings", bool_str(c.regularize_embeddings)},
  };
}

ModelConfig config_from_record(const std::map<std::string, std::string>& r) {
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = r.find(key);
    if (it == r.end()) throw CheckpointError("checkpoint config lacks '" + key + "'");
    return it->second;
  };
  ModelConfig c;
  try {
    c.variant = parse_variant(get("variant"));
    c.strategy = parse_strategy(get("strategy"));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  c.embed_dim = parse_size("embed_dim", get("embed_dim"));
  c.hidden_dim = parse_size("hidden_dim", get("hidden_dim"));
  c.output_hidden = parse_size("output_hidden", get("output_hidden"));
  c.num_classes = parse_size("num_classes", get("num_classes"));
  c.split_forget_projection = parse_bool("split_forget_projection", get("split_forget_projection"));
  c.literal_topdown = parse_bool("literal_topdown", get("literal_topdown"));
  c.regularize_embeddings = parse_bool("regularize_embeddings", get("regularize_embeddings"));
  return c;
}

void write_checkpoint(const std::string& path, const CheckpointData& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  Writer w(out);
  w.raw(kMagic, sizeof kMagic);
  w.pod(data.version);
  w.pod(static_cast<std::uint32_t>(data.config.size()));
  for (const auto& [k, v] : data.config) {
    w.str(k);
    w.str(v);
  }
  w.pod(static_cast<std::uint64_t>(data.vocab.size()));
  for (const auto& word : data.vocab) w.str(word);
  w.pod(static_cast<std::uint64_t>(data.tensors.size()));
  for (const auto& t : data.tensors) {
    w.str(t.name);
    const Shape& s = t.value.shape();
    w.pod(static_cast<std::uint32_t>(s.size()));
    for (auto d : s) w.pod(static_cast<std::uint64_t>(d));
    w.raw(t.value.data().data(), t.value.size() * sizeof(double));
  }
  w.raw(kTrailer, sizeof kTrailer);
  out.flush();
  if (!out) throw CheckpointError("write to " + path + " failed");
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

  char magic[8];
  r.raw(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw CheckpointError(path + " is not a checkpoint (bad magic)");
  CheckpointData data;
  data.version = r.pod<std::uint32_t>("version");
  if (data.version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(data.version) +
                          " (this build reads version " + std::to_string(kCheckpointVersion) + ")");

  const auto n_config = r.pod<std::uint32_t>("config count");
  for (std::uint32_t i = 0; i < n_config; ++i) {
    std::string k = r.str("config key");
    data.config[k] = r.str("config value");
  }
  const auto n_vocab = r.pod<std::uint64_t>("vocabulary size");
  // every entry needs at least its length prefix
  if (n_vocab > r.remaining() / 4) throw CheckpointError("checkpoint truncated in the vocabulary");
  data.vocab.reserve(n_vocab);
  for (std::uint64_t i = 0; i < n_vocab; ++i) data.vocab.push_back(r.str("vocabulary entry"));

  const auto n_tensor = r.pod<std::uint64_t>("tensor count");
  for (std::uint64_t i = 0; i < n_tensor; ++i) {
    NamedTensor t;
    t.name = r.str("tensor name");
    const auto rank = r.pod<std::uint32_t>("tensor rank");
    if (rank < 1 || rank > 2)
      throw CheckpointError("tensor " + t.name + ": unsupported rank " + std::to_string(rank));
    Shape shape;
    std::uint64_t count = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto dim = r.pod<std::uint64_t>("tensor shape");
      if (dim == 0 || dim > r.remaining())
        throw CheckpointError("tensor " + t.name + ": implausible dimension " + std::to_string(dim));
      shape.push_back(static_cast<std::size_t>(dim));
      count *= dim;
    }
    if (count * sizeof(double) > r.remaining())
      throw CheckpointError("checkpoint truncated in the data of tensor " + t.name);
    t.value = Tensor(shape);
    r.raw(t.value.data().data(), count * sizeof(double), "tensor data");
    data.tensors.push_back(std::move(t));
  }
  char trailer[4];
  r.raw(trailer, sizeof trailer, "trailer");
  if (std::memcmp(trailer, kTrailer, sizeof trailer) != 0 || r.remaining() != 0)
    throw CheckpointError(path + ": corrupt trailer");
  return data;
}

void save_checkpoint(const std::string& path, const Model& model,
                     const std::map<std::string, std::string>& extra) {
  CheckpointData data;
  data.config = extra;
  for (auto& [k, v] : config_record(model.config())) data.config[k] = v;
  data.vocab = model.vocab().words();
  for (const auto* p : model.params().all()) data.tensors.push_back({p->name, p->value});
  write_checkpoint(path, data);
}

void load_parameters(Model& model, const CheckpointData& data) {
  ParamSet& ps = model.params();
  std::vector<Parameter*> targets;
  std::vector<char> seen(ps.size(), 0);
  for (const auto& t : data.tensors) {
    Parameter* p = ps.find(t.name);
    if (!p) throw CheckpointError("checkpoint tensor " + t.name + " has no counterpart in the model");
    if (p->value.shape() != t.value.shape())
      throw CheckpointError("tensor " + t.name + ": checkpoint shape " + shape_str(t.value.shape()) +
                            " vs model shape " + shape_str(p->value.shape()));
    targets.push_back(p);
  }
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (auto* p : targets)
      if (p == &ps[i]) seen[i] = 1;
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (!seen[i]) throw CheckpointError("checkpoint lacks tensor " + ps[i].name);

  for (std::size_t i = 0; i < targets.size(); ++i) targets[i]->value = data.tensors[i].value;
}

Model load_checkpoint(const std::string& path) {
  CheckpointData data = read_checkpoint(path);
  const ModelConfig config = config_from_record(data.config);
  if (data.vocab.empty() || data.vocab[0] != Vocabulary::kUnkToken)
    throw CheckpointError(path + ": vocabulary must start with " + std::string(Vocabulary::kUnkToken));
  Vocabulary vocab;
  for (std::size_t i = 1; i < data.vocab.size(); ++i) {
    if (vocab.add(data.vocab[i]) != i)
      throw CheckpointError(path + ": duplicate vocabulary entry '" + data.vocab[i] + "'");
  }
  // The embedding shape follows the stored vocabulary, so a fresh model of
  // the stored config must match every tensor exactly.
  Model model(config, std::move(vocab), 0);
  load_parameters(model, data);
  return model;
}

}  // namespace lextree
