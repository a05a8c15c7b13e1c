// lextree: train, evaluate and inspect head-lexicalized tree LSTM classifiers.
//
// Every subcommand reads its flags, optionally merged with a key=value file
// given by --config (flags given on the command line win), validates all
// inputs, then computes. Exit codes: 0 ok, 1 invalid input, 2 non-finite loss.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "lextree/analysis.hpp"
#include "lextree/checkpoint.hpp"
#include "lextree/gradcheck.hpp"
#include "lextree/reranker.hpp"
#include "lextree/train.hpp"

using namespace lextree;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// options

struct Opts {
  std::string task = "sst5";
  std::string variant = "biconTree";
  std::string strategy = "G";
  std::size_t embed_dim = 300;
  std::size_t hidden = 150;
  std::size_t out_hidden = 128;
  int classes = 0;  // custom task only
  double dropout = 0.5;
  double l2 = 1e-4;
  double lr = 0.001;
  int epochs = 30;
  std::string seeds = "5";
  std::string supervision = "all";
  bool zero_gate = false;
  bool split_forget = false;
  bool literal_topdown = false;
  bool regularize_embeddings = false;
  bool allow_nary = false;
  bool no_shuffle = false;

  std::string embeddings;
  std::string train, dev, test, input;
  std::string train_labels, dev_labels, test_labels;
  std::string checkpoint;
  std::string out;

  // gradcheck
  std::string dims = "5x4";
  double tol = 1e-4;
  int trees = 20;
  std::size_t check_out_hidden = 3;

  // eval / predict / inspect-heads
  bool nodes = false;
  bool json_only = false;

  // compare-strategies
  bool zero_gate_control = false;

  // rerank-score
  std::string candidates, gold, train_candidates, train_gold;
  double alpha = 0.5;
  double margin_scale = 0.1;
};

void add_model_flags(CLI::App* c, Opts& o) {
  c->add_option("--variant", o.variant, "biLSTM | conTree | topdown-conTree | conTree+lex | biconTree");
  c->add_option("--strategy", o.strategy, "head strategy L | R | A | G");
  c->add_option("--embed-dim", o.embed_dim, "word vector size");
  c->add_option("--hidden", o.hidden, "LSTM state size");
  c->add_option("--out-hidden", o.out_hidden, "classifier hidden layer size");
  c->add_flag("--split-forget", o.split_forget, "separate head projections for the two forget gates");
  c->add_flag("--literal-topdown", o.literal_topdown, "top-down root step without the head input");
}

void add_train_flags(CLI::App* c, Opts& o) {
  add_model_flags(c, o);
  c->add_option("--task", o.task, "sst5 | sst2 | trec | custom");
  c->add_option("--classes", o.classes, "number of classes (custom task)");
  c->add_option("--dropout", o.dropout, "input dropout rate");
  c->add_option("--l2", o.l2, "L2 weight");
  c->add_option("--lr", o.lr, "Adam learning rate");
  c->add_option("--epochs", o.epochs, "passes over the training set per seed");
  c->add_option("--seeds", o.seeds, "seed count N (seeds base..base+N-1) or a list like 3,7,9");
  c->add_option("--supervision", o.supervision, "all | root");
  c->add_flag("--zero-gate", o.zero_gate, "zero and freeze the head gate");
  c->add_flag("--regularize-embeddings", o.regularize_embeddings, "include word vectors in the L2 term");
  c->add_flag("--no-shuffle", o.no_shuffle, "keep the file order of training trees");
  c->add_flag("--allow-nary", o.allow_nary, "skip (and report) trees that are not binary");
  c->add_option("--embeddings", o.embeddings, "word vector file")->check(CLI::ExistingFile);
  c->add_option("--train", o.train, "training trees")->check(CLI::ExistingFile);
  c->add_option("--dev", o.dev, "development trees")->check(CLI::ExistingFile);
  c->add_option("--test", o.test, "test trees")->check(CLI::ExistingFile);
  c->add_option("--train-labels", o.train_labels, "TREC labels aligned with --train")->check(CLI::ExistingFile);
  c->add_option("--dev-labels", o.dev_labels, "TREC labels aligned with --dev")->check(CLI::ExistingFile);
  c->add_option("--test-labels", o.test_labels, "TREC labels aligned with --test")->check(CLI::ExistingFile);
  c->add_option("--out", o.out, "output directory");
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(n) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r\"");
      const auto b = s.find_last_not_of(" \t\r\"");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

// Config values fill only the options the command line left unset.
void merge_config(CLI::App* sub, const std::string& path) {
  for (const auto& [key, value] : read_config_file(path)) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = sub->get_option_no_throw("--" + name);
    if (opt == nullptr) throw UsageError("config " + path + ": unknown key '" + key + "'");
    if (opt->count() > 0 || value.empty()) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

// Effective value of every option, for the manifest and for re-runs.
std::map<std::string, std::string> snapshot_options(const CLI::App* sub) {
  std::map<std::string, std::string> out;
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config" || name == "out") continue;
    std::string value = opt->get_default_str();
    if (opt->count() > 0) value = opt->as<std::string>();
    if (opt->get_items_expected_max() == 0) value = opt->count() > 0 ? "true" : "false";
    out[name] = value;
  }
  return out;
}

// ---------------------------------------------------------------------------
// data

struct Task {
  std::string name;
  int classes = 5;
  Supervision supervision = Supervision::AllNodes;
};

Task resolve_task(const Opts& o) {
  Task t{o.task};
  if (o.task == "sst5") t.classes = 5;
  else if (o.task == "sst2") t.classes = 2;
  else if (o.task == "trec") {
    t.classes = static_cast<int>(kTrecLabels.size());
    t.supervision = Supervision::RootOnly;
  } else if (o.task == "custom") {
    if (o.classes < 2) throw UsageError("--task custom needs --classes >= 2");
    t.classes = o.classes;
  } else {
    throw UsageError("unknown --task '" + o.task + "' (sst5, sst2, trec, custom)");
  }
  if (o.supervision == "root") t.supervision = Supervision::RootOnly;
  else if (o.supervision != "all") throw UsageError("--supervision must be all or root");
  if (t.name == "trec" && t.supervision == Supervision::AllNodes)
    t.supervision = Supervision::RootOnly;  // only roots carry labels
  return t;
}

std::vector<BinaryTree> load_trees(const std::string& path, const std::string& labels, const Task& task,
                                   bool allow_nary, const char* role) {
  if (path.empty()) throw UsageError(std::string("missing --") + role);
  TreeReadOptions ro;
  ro.skip_invalid = allow_nary;
  auto file = read_tree_file(path, ro);
  for (const auto& p : file.problems) std::cerr << "warning: " << path << " " << p << " (skipped)\n";
  auto trees = std::move(file.trees);
  if (task.name == "trec") {
    if (labels.empty()) throw UsageError(std::string("--task trec needs --") + role + "-labels");
    attach_trec_labels(trees, read_trec_file(labels));
  } else if (task.name == "sst2") {
    trees = apply_sentiment_task(std::move(trees), SentimentTask::Binary);
  } else if (task.name == "sst5") {
    trees = apply_sentiment_task(std::move(trees), SentimentTask::FineGrained);
  }
  for (const auto& t : trees) t.check_labels(task.classes);
  if (trees.empty()) throw UsageError(path + ": no usable trees");
  return trees;
}

std::unique_ptr<EmbeddingTable> load_table(const Opts& o,
                                           const std::vector<const std::vector<BinaryTree>*>& sets) {
  if (o.embeddings.empty()) return nullptr;
  std::unordered_set<std::string> keep;
  for (const auto* s : sets)
    for (const auto& t : *s)
      for (const auto& w : t.tokens()) {
        keep.insert(w);
        keep.insert(lowercase(w));
      }
  auto table = std::make_unique<EmbeddingTable>(load_embeddings(o.embeddings, o.embed_dim, &keep));
  for (const auto& w : table->warnings()) std::cerr << "warning: " << w << "\n";
  return table;
}

ModelConfig model_config(const Opts& o, int classes) {
  ModelConfig c;
  c.variant = parse_variant(o.variant);
  c.strategy = parse_strategy(o.strategy);
  c.embed_dim = o.embed_dim;
  c.hidden_dim = o.hidden;
  c.output_hidden = o.out_hidden;
  c.num_classes = static_cast<std::size_t>(classes);
  c.split_forget_projection = o.split_forget;
  c.literal_topdown = o.literal_topdown;
  c.regularize_embeddings = o.regularize_embeddings;
  c.validate();
  return c;
}

std::vector<std::uint64_t> resolve_seeds(const std::string& text) {
  std::uint64_t base = 1;
  if (const char* env = std::getenv("LEXTREE_SEED")) {
    try {
      base = std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError(std::string("LEXTREE_SEED is not a number: ") + env);
    }
  }
  std::vector<std::uint64_t> seeds;
  try {
    if (text.find(',') == std::string::npos) {
      const auto n = std::stoull(text);
      for (std::uint64_t i = 0; i < n; ++i) seeds.push_back(base + i);
    } else {
      std::stringstream ss(text);
      for (std::string item; std::getline(ss, item, ',');) seeds.push_back(std::stoull(item));
    }
  } catch (const std::exception&) {
    throw UsageError("--seeds must be a count or a comma-separated list, got '" + text + "'");
  }
  if (seeds.empty()) throw UsageError("--seeds selects no seed");
  return seeds;
}

TrainConfig train_config(const Opts& o, const Task& task) {
  TrainConfig c;
  c.model = model_config(o, task.classes);
  if (!(o.dropout >= 0.0 && o.dropout < 1.0)) throw UsageError("--dropout must lie in [0, 1)");
  if (!(o.l2 >= 0.0)) throw UsageError("--l2 must be >= 0");
  if (!(o.lr > 0.0)) throw UsageError("--lr must be > 0");
  if (o.epochs <= 0) throw UsageError("--epochs must be positive");
  c.dropout = o.dropout;
  c.l2 = o.l2;
  c.epochs = o.epochs;
  c.seeds = resolve_seeds(o.seeds);
  c.supervision = task.supervision;
  c.adam.learning_rate = o.lr;
  c.shuffle = !o.no_shuffle;
  c.zero_frozen_head_gate = o.zero_gate;
  if (o.zero_gate && c.model.strategy != HeadStrategy::Gated)
    throw UsageError("--zero-gate needs --strategy G");
  return c;
}

// ---------------------------------------------------------------------------
// output helpers

// git blob hash: SHA-1 over "blob <size>\0" + content
std::string content_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  const std::string bytes{std::istreambuf_iterator<char>(in), {}};
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

json inputs_record(const Opts& o) {
  json j = json::object();
  const std::pair<const char*, const std::string*> files[] = {
      {"train", &o.train},         {"dev", &o.dev},
      {"test", &o.test},           {"embeddings", &o.embeddings},
      {"train_labels", &o.train_labels}, {"dev_labels", &o.dev_labels},
      {"test_labels", &o.test_labels}};
  for (const auto& [role, path] : files)
    if (!path->empty()) j[role] = {{"path", fs::absolute(*path).string()}, {"sha1", content_hash(*path)}};
  return j;
}

json epoch_record(const EpochMetrics& m) {
  return {{"seed", m.seed},
          {"epoch", m.epoch},
          {"train_loss", m.train_loss},
          {"dev_root_acc", m.dev_root_acc},
          {"dev_node_acc", m.dev_node_acc}};
}

std::string pct(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * x;
  return os.str();
}

fs::path prepare_out(const std::string& out) {
  if (out.empty()) return {};
  fs::create_directories(out);
  return fs::path(out);
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_train(const Opts& o, const CLI::App* sub) {
  const Task task = resolve_task(o);
  const TrainConfig cfg = train_config(o, task);
  const auto train_set = load_trees(o.train, o.train_labels, task, o.allow_nary, "train");
  const auto dev_set = load_trees(o.dev, o.dev_labels, task, o.allow_nary, "dev");
  std::vector<BinaryTree> test_set;
  if (!o.test.empty()) test_set = load_trees(o.test, o.test_labels, task, o.allow_nary, "test");
  const auto table = load_table(o, {&train_set, &dev_set, &test_set});
  const auto vocab = build_vocabulary({&train_set, &dev_set, &test_set}, table.get());
  const fs::path out = prepare_out(o.out);

  std::ofstream metrics;
  if (!out.empty()) metrics.open(out / "metrics.jsonl");
  const auto t0 = std::chrono::steady_clock::now();
  auto result = train(cfg, vocab, table.get(), train_set, dev_set, [&](const EpochMetrics& m) {
    const std::string line = epoch_record(m).dump();
    std::cout << line << std::endl;
    if (metrics) metrics << line << '\n' << std::flush;
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::optional<EvalResult> test_eval;
  if (!test_set.empty()) test_eval = evaluate(result.best_model, test_set);

  std::cout << "\n" << std::left << std::setw(6) << "seed" << std::setw(7) << "epoch" << std::setw(12)
            << "train_loss" << std::setw(10) << "dev_root" << "dev_node\n";
  for (const auto& m : result.trace)
    std::cout << std::setw(6) << m.seed << std::setw(7) << m.epoch << std::setw(12) << std::fixed
              << std::setprecision(4) << m.train_loss << std::setw(10) << pct(m.dev_root_acc)
              << pct(m.dev_node_acc) << "\n";
  std::cout << "best: seed " << result.best_seed << " epoch " << result.best_epoch << " dev root "
            << pct(result.best_dev_root_acc);
  if (test_eval) std::cout << "  test root " << pct(test_eval->root_acc()) << " node " << pct(test_eval->node_acc());
  std::cout << "  (" << std::setprecision(1) << secs << "s)\n";

  if (out.empty()) return 0;
  const auto ckpt = out / "best.ckpt";
  save_checkpoint(ckpt.string(), result.best_model,
                  {{"task", task.name},
                   {"seed", std::to_string(result.best_seed)},
                   {"epoch", std::to_string(result.best_epoch)}});
  const auto options = snapshot_options(sub);
  std::string conf;
  for (const auto& [k, v] : options) conf += k + "=" + v + "\n";
  write_text(out / "run.conf", conf);

  json manifest = {{"command", "train"},
                   {"config", options},
                   {"seed_env", std::getenv("LEXTREE_SEED") ? std::getenv("LEXTREE_SEED") : ""},
                   {"seeds", cfg.seeds},
                   {"inputs", inputs_record(o)},
                   {"metrics", json::array()},
                   {"best", {{"seed", result.best_seed},
                             {"epoch", result.best_epoch},
                             {"dev_root_acc", result.best_dev_root_acc}}},
                   {"checkpoint", ckpt.string()},
                   {"checkpoint_sha1", content_hash(ckpt.string())}};
  for (const auto& m : result.trace) manifest["metrics"].push_back(epoch_record(m));
  if (test_eval) {
    manifest["best"]["test_root_acc"] = test_eval->root_acc();
    manifest["best"]["test_node_acc"] = test_eval->node_acc();
  }
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << (out / "manifest.json").string() << "\n";
  return 0;
}

Task task_of_checkpoint(const Opts& o, const CheckpointData& data, const CLI::App* sub) {
  Opts copy = o;
  if (sub->get_option("--task")->count() == 0) {
    const auto it = data.config.find("task");
    copy.task = it != data.config.end() ? it->second : "custom";
  }
  if (copy.task == "custom") copy.classes = std::stoi(data.config.at("num_classes"));
  return resolve_task(copy);
}

Model require_model(const std::string& path) {
  if (path.empty()) throw UsageError("missing --checkpoint");
  return load_checkpoint(path);
}

void print_buckets(const char* title, const std::vector<BucketRow>& rows, json& record) {
  std::cout << title << "\n";
  json arr = json::array();
  for (const auto& r : rows) {
    std::cout << "  " << std::left << std::setw(12) << r.name << std::right << std::setw(6) << r.total << "  "
              << (r.accuracy ? pct(*r.accuracy) : std::string("n/a")) << "\n";
    arr.push_back({{"bucket", r.name}, {"total", r.total}, {"correct", r.correct},
                   {"accuracy", r.accuracy ? json(*r.accuracy) : json(nullptr)}});
  }
  record[title] = arr;
}

int cmd_eval(const Opts& o, const CLI::App* sub) {
  if (o.checkpoint.empty()) throw UsageError("missing --checkpoint");
  const auto data = read_checkpoint(o.checkpoint);
  const Task task = task_of_checkpoint(o, data, sub);
  const Model model = load_checkpoint(o.checkpoint);
  if (static_cast<int>(model.config().num_classes) != task.classes)
    throw UsageError("checkpoint has " + std::to_string(model.config().num_classes) + " classes, task " +
                     task.name + " needs " + std::to_string(task.classes));
  const auto trees = load_trees(o.test, o.test_labels, task, o.allow_nary, "test");

  const auto r = evaluate(model, trees);
  json rec = {{"trees", r.roots}, {"root_acc", r.root_acc()}, {"node_acc", r.node_acc()}, {"nodes", r.nodes}};
  std::vector<SentenceOutcome> outcomes;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    const auto& root = trees[i].node(trees[i].root());
    if (!root.class_id) continue;
    outcomes.push_back({trees[i].tokens(), *root.class_id, r.root_predictions[i]});
  }
  if (!o.json_only) {
    std::cout << "root accuracy " << pct(r.root_acc()) << " (" << r.roots_correct << "/" << r.roots << ")\n"
              << "node accuracy " << pct(r.node_acc()) << " (" << r.nodes_correct << "/" << r.nodes << ")\n";
    print_buckets("length", bucket_accuracy(outcomes, Bucketing::Length), rec);
    print_buckets("class", bucket_accuracy(outcomes, Bucketing::Class, task.classes), rec);
    print_buckets("negation", bucket_accuracy(outcomes, Bucketing::Negation), rec);
  }
  std::cout << rec.dump() << "\n";
  return 0;
}

std::vector<BinaryTree> plain_trees(const Opts& o) {
  const std::string& path = o.input.empty() ? o.test : o.input;
  if (path.empty()) throw UsageError("missing --input");
  TreeReadOptions ro;
  ro.skip_invalid = o.allow_nary;
  auto file = read_tree_file(path, ro);
  for (const auto& p : file.problems) std::cerr << "warning: " << path << " " << p << " (skipped)\n";
  return std::move(file.trees);
}

std::string join(const std::vector<std::string>& words) {
  std::string s;
  for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
  return s;
}

int cmd_predict(const Opts& o) {
  const Model model = require_model(o.checkpoint);
  const auto trees = plain_trees(o);
  for (std::size_t i = 0; i < trees.size(); ++i) {
    const auto preds = model.predict_nodes(trees[i], false);
    json rec = {{"index", i},
                {"text", join(trees[i].tokens())},
                {"root", preds[static_cast<std::size_t>(trees[i].root())]}};
    if (o.nodes) {
      json nodes = json::array();
      for (int id : trees[i].postorder()) {
        const auto& n = trees[i].node(id);
        nodes.push_back({{"id", id}, {"span", {n.start, n.end}}, {"pred", preds[static_cast<std::size_t>(id)]}});
      }
      rec["nodes"] = nodes;
    }
    std::cout << rec.dump() << "\n";
  }
  return 0;
}

int cmd_inspect_heads(const Opts& o) {
  const Model model = require_model(o.checkpoint);
  if (!model.config().propagates_heads())
    throw UsageError(std::string(variant_name(model.config().variant)) + " does not propagate heads");
  const auto trees = plain_trees(o);
  for (const auto& tree : trees) {
    Graph g;
    const auto enc = model.encode(g, tree, RunMode::eval());
    const auto heads = extract_heads(tree, enc);
    if (o.json_only)
      std::cout << head_records(tree, heads);
    else
      std::cout << render_heads(tree, heads) << "\n";
  }
  return 0;
}

std::pair<std::size_t, std::size_t> parse_dims(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    const auto e = std::stoul(s.substr(0, x)), d = std::stoul(s.substr(x + 1));
    if (e == 0 || d == 0) throw std::invalid_argument(s);
    return {e, d};
  } catch (const std::exception&) {
    throw UsageError("--dims must look like 5x4 (embedding x hidden), got '" + s + "'");
  }
}

// Random bracketing over a fixed word list, every node labeled.
BinaryTree random_tree(std::mt19937_64& rng, const std::vector<std::string>& words, int classes) {
  std::uniform_int_distribution<std::size_t> len(1, 5), pick(0, words.size() - 1);
  std::uniform_int_distribution<int> label(0, classes - 1);
  BinaryTree t;
  std::vector<int> pending;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) pending.push_back(t.add_leaf(std::to_string(label(rng)), words[pick(rng)]));
  while (pending.size() > 1) {
    std::uniform_int_distribution<std::size_t> at(0, pending.size() - 2);
    const std::size_t k = at(rng);
    const int merged = t.add_branch(std::to_string(label(rng)), pending[k], pending[k + 1]);
    pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(k));
    pending[k] = merged;
  }
  t.finish();
  return t;
}

int cmd_gradcheck(const Opts& o) {
  const auto [e, d] = parse_dims(o.dims);
  if (o.trees <= 0) throw UsageError("--trees must be positive");
  if (!(o.tol > 0.0)) throw UsageError("--tol must be positive");
  const bool rerank = o.variant == "reranker";
  ModelConfig cfg;
  if (!rerank) {
    Opts m = o;
    m.embed_dim = e;
    m.hidden = d;
    m.out_hidden = o.check_out_hidden;
    cfg = model_config(m, 5);
  }
  const std::vector<std::string> words{"good", "bad", "not", "film", "the", "fun"};
  Vocabulary vocab;
  for (const auto& w : words) vocab.add(w);
  const std::uint64_t base = resolve_seeds("1").front();
  std::mt19937_64 rng(base);

  double worst = 0.0;
  std::string where;
  bool ok = true;
  for (int i = 0; i < o.trees; ++i) {
    const auto tree = random_tree(rng, words, 5);
    GradCheckReport r;
    if (rerank) {
      RerankConfig rc;
      rc.embed_dim = e;
      rc.hidden_dim = d;
      rc.score_hidden = o.check_out_hidden;
      rc.strategy = parse_strategy(o.strategy);
      Reranker model(rc, vocab, {"0", "1", "2", "3", "4"}, base + static_cast<std::uint64_t>(i));
      r = grad_check(model.params(), [&](Graph& g) { return model.tree_score(g, tree); }, o.tol);
    } else {
      Model model(cfg, vocab, base + static_cast<std::uint64_t>(i));
      r = grad_check(
          model.params(),
          [&](Graph& g) { return model.tree_loss(g, tree, Supervision::AllNodes, RunMode::eval(), o.l2); },
          o.tol);
    }
    ok = ok && r.pass;
    if (!r.failure.empty()) where = r.failure;
    if (r.max_rel_err >= worst) {
      worst = r.max_rel_err;
      if (r.failure.empty()) where = r.worst;
    }
  }
  std::cout << (ok ? "PASS" : "FAIL") << " max_rel_err=" << std::scientific << std::setprecision(3) << worst
            << " at=" << where << " trees=" << o.trees << " tol=" << o.tol << "\n";
  return ok ? 0 : 1;
}

int cmd_count_params(const Opts& o) {
  Opts m = o;
  const auto cfg = model_config(m, o.classes > 0 ? o.classes : 5);
  const auto count = count_params(cfg);
  std::cout << std::left << std::setw(14) << "group" << std::right << std::setw(12) << "params\n";
  json groups = json::object();
  for (const auto& g : count.groups) {
    std::cout << std::left << std::setw(14) << g.group << std::right << std::setw(11) << g.count << "\n";
    groups[g.group] = g.count;
  }
  std::cout << std::left << std::setw(14) << "total" << std::right << std::setw(11) << count.total << "\n";
  json rec = {{"variant", variant_name(cfg.variant)}, {"hidden", cfg.hidden_dim}, {"total", count.total}, {"groups", groups}};
  if (const auto ref = reference_param_count(cfg.variant, cfg.hidden_dim)) {
    const double dev = 100.0 * (static_cast<double>(count.total) - static_cast<double>(*ref)) / static_cast<double>(*ref);
    std::cout << std::left << std::setw(14) << "reference" << std::right << std::setw(11) << *ref << "  ("
              << std::showpos << std::fixed << std::setprecision(1) << dev << std::noshowpos << "%)\n";
    rec["reference"] = *ref;
    rec["deviation_pct"] = dev;
  }
  std::cout << rec.dump() << "\n";
  return 0;
}

int cmd_compare(const Opts& o) {
  const Task task = resolve_task(o);
  const TrainConfig cfg = train_config(o, task);
  if (!cfg.model.lexicalized() && !cfg.model.propagates_heads())
    throw UsageError("--variant must use heads (conTree+lex, topdown-conTree or biconTree)");
  const auto train_set = load_trees(o.train, o.train_labels, task, o.allow_nary, "train");
  const auto dev_set = load_trees(o.dev, o.dev_labels, task, o.allow_nary, "dev");
  std::vector<BinaryTree> test_set;
  if (!o.test.empty()) test_set = load_trees(o.test, o.test_labels, task, o.allow_nary, "test");
  const auto table = load_table(o, {&train_set, &dev_set, &test_set});
  const auto vocab = build_vocabulary({&train_set, &dev_set, &test_set}, table.get());

  CompareOptions opt;
  opt.zero_gate_control = o.zero_gate_control;
  const auto rows = compare_strategies(cfg, vocab, table.get(), train_set, dev_set, test_set, opt,
                                       [](const EpochMetrics& m) { std::cerr << epoch_record(m).dump() << "\n"; });
  std::cout << std::left << std::setw(14) << "strategy" << std::setw(10) << "dev_root" << std::setw(11)
            << "test_root" << "reference\n";
  for (const auto& r : rows) {
    std::cout << std::setw(14) << r.name << std::setw(10) << pct(r.dev_root_acc) << std::setw(11)
              << (r.test_root_acc ? pct(*r.test_root_acc) : "-")
              << (r.reference ? std::to_string(*r.reference).substr(0, 4) : "-") << "\n";
  }
  for (const auto& r : rows) {
    json rec = {{"strategy", r.name}, {"dev_root_acc", r.dev_root_acc}, {"best_seed", r.best_seed},
                {"best_epoch", r.best_epoch}};
    if (r.test_root_acc) rec["test_root_acc"] = *r.test_root_acc;
    if (r.reference) rec["reference"] = *r.reference;
    std::cout << rec.dump() << "\n";
  }
  return 0;
}

// --- reranker persistence: the generic archive with kind=reranker

void save_reranker(const std::string& path, const Reranker& r) {
  CheckpointData data;
  const auto& c = r.config();
  data.config = {{"kind", "reranker"},
                 {"embed_dim", std::to_string(c.embed_dim)},
                 {"hidden_dim", std::to_string(c.hidden_dim)},
                 {"score_hidden", std::to_string(c.score_hidden)},
                 {"strategy", std::string(strategy_name(c.strategy))},
                 {"labels", join(r.labels())}};
  data.vocab = r.vocab().words();
  for (const auto* p : r.params().all()) data.tensors.push_back({p->name, p->value});
  write_checkpoint(path, data);
}

Reranker load_reranker(const std::string& path, double alpha, double margin) {
  const auto data = read_checkpoint(path);
  const auto kind = data.config.find("kind");
  if (kind == data.config.end() || kind->second != "reranker")
    throw UsageError(path + " is not a reranker checkpoint");
  RerankConfig c;
  c.embed_dim = std::stoul(data.config.at("embed_dim"));
  c.hidden_dim = std::stoul(data.config.at("hidden_dim"));
  c.score_hidden = std::stoul(data.config.at("score_hidden"));
  c.strategy = parse_strategy(data.config.at("strategy"));
  c.alpha = alpha;
  c.margin_scale = margin;
  std::vector<std::string> labels;
  std::stringstream ss(data.config.at("labels"));
  for (std::string l; ss >> l;) labels.push_back(l);
  Vocabulary vocab;
  for (std::size_t i = 1; i < data.vocab.size(); ++i) vocab.add(data.vocab[i]);
  Reranker r(c, vocab, labels, 0);
  if (data.tensors.size() != r.params().size()) throw CheckpointError(path + ": tensor count mismatch");
  for (const auto& t : data.tensors) {
    Parameter* p = r.params().find(t.name);
    if (p == nullptr || p->value.shape() != t.value.shape())
      throw CheckpointError(path + ": tensor " + t.name + " does not fit the reranker");
  }
  for (const auto& t : data.tensors) r.params().at(t.name).value = t.value;
  return r;
}

int cmd_rerank(const Opts& o) {
  if (!(o.alpha >= 0.0 && o.alpha <= 1.0)) throw UsageError("--alpha must lie in [0, 1]");
  if (o.candidates.empty()) throw UsageError("missing --candidates");
  auto blocks = read_candidates(o.candidates);
  std::vector<BinaryTree> gold;
  if (!o.gold.empty()) {
    gold = read_tree_file(o.gold).trees;
    if (gold.size() != blocks.size())
      throw UsageError("--gold has " + std::to_string(gold.size()) + " trees for " +
                       std::to_string(blocks.size()) + " candidate blocks");
  }

  std::optional<Reranker> model;
  if (!o.train_candidates.empty() || !o.train_gold.empty()) {
    if (o.train_candidates.empty() || o.train_gold.empty())
      throw UsageError("training the reranker needs both --train-candidates and --train-gold");
    const auto train_blocks = read_candidates(o.train_candidates);
    const auto train_gold = read_tree_file(o.train_gold).trees;
    if (train_gold.size() != train_blocks.size()) throw UsageError("--train-gold and --train-candidates differ in length");
    std::vector<RerankExample> data;
    std::vector<BinaryTree> every;
    for (std::size_t i = 0; i < train_blocks.size(); ++i) {
      RerankExample ex{train_gold[i], {}};
      for (const auto& c : train_blocks[i]) ex.candidates.push_back(c.tree);
      every.push_back(train_gold[i]);
      every.insert(every.end(), ex.candidates.begin(), ex.candidates.end());
      data.push_back(std::move(ex));
    }
    for (const auto& b : blocks)
      for (const auto& c : b) every.push_back(c.tree);
    const auto table = load_table(o, {&every});
    RerankConfig rc;
    rc.embed_dim = o.embed_dim;
    rc.hidden_dim = o.hidden;
    rc.score_hidden = o.out_hidden;
    rc.strategy = parse_strategy(o.strategy);
    rc.alpha = o.alpha;
    rc.margin_scale = o.margin_scale;
    model.emplace(rc, build_vocabulary({&every}, table.get()), branch_labels(every), resolve_seeds("1").front(),
                  table.get());
    AdamOptions adam;
    adam.learning_rate = o.lr;
    const auto losses = train_reranker(*model, data, o.epochs, resolve_seeds("1").front(), adam);
    for (std::size_t i = 0; i < losses.size(); ++i)
      std::cerr << json{{"epoch", i + 1}, {"hinge", losses[i]}}.dump() << "\n";
    if (!o.out.empty()) save_reranker((prepare_out(o.out) / "reranker.ckpt").string(), *model);
  } else {
    if (o.checkpoint.empty()) throw UsageError("give --checkpoint or --train-candidates/--train-gold");
    model.emplace(load_reranker(o.checkpoint, o.alpha, o.margin_scale));
  }

  Parseval base_total, chosen_total, oracle_total;
  auto add = [](Parseval& acc, const Parseval& p) {
    acc.matched += p.matched;
    acc.candidate += p.candidate;
    acc.gold += p.gold;
  };
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto& block = blocks[i];
    if (block.empty()) continue;
    score_candidates(*model, block, o.alpha);
    const std::size_t pick = rerank(block);
    json rec = {{"block", i}, {"selected", pick}, {"combined", block[pick].combined},
                {"model_score", block[pick].model_score}, {"tree", block[pick].tree.to_string()}};
    if (!gold.empty()) {
      const auto chosen = parseval(block[pick].tree, gold[i]);
      add(chosen_total, chosen);
      add(base_total, parseval(block[0].tree, gold[i]));
      add(oracle_total, parseval(block[oracle_select(block, gold[i])].tree, gold[i]));
      rec["f1"] = chosen.f1();
    }
    std::cout << rec.dump() << "\n";
  }
  if (!gold.empty()) {
    std::cout << "F1 first candidate " << pct(base_total.f1()) << "  reranked " << pct(chosen_total.f1())
              << "  oracle " << pct(oracle_total.f1()) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Head-lexicalized tree LSTM classifiers"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  Opts o;
  std::string config_path;

  auto* train_cmd = app.add_subcommand("train", "train over seeds, select on dev, write checkpoint + manifest");
  add_train_flags(train_cmd, o);

  auto* eval_cmd = app.add_subcommand("eval", "accuracy of a checkpoint, with length/class/negation buckets");
  eval_cmd->add_option("--checkpoint", o.checkpoint)->check(CLI::ExistingFile);
  eval_cmd->add_option("--test", o.test)->check(CLI::ExistingFile);
  eval_cmd->add_option("--test-labels", o.test_labels)->check(CLI::ExistingFile);
  eval_cmd->add_option("--task", o.task, "defaults to the task stored in the checkpoint");
  eval_cmd->add_flag("--allow-nary", o.allow_nary);
  eval_cmd->add_flag("--json", o.json_only, "only the JSON record");

  auto* predict_cmd = app.add_subcommand("predict", "per-sentence predictions as JSON lines");
  predict_cmd->add_option("--checkpoint", o.checkpoint)->check(CLI::ExistingFile);
  predict_cmd->add_option("--input", o.input, "binarized trees")->check(CLI::ExistingFile);
  predict_cmd->add_flag("--nodes", o.nodes, "include every node");
  predict_cmd->add_flag("--allow-nary", o.allow_nary);

  auto* heads_cmd = app.add_subcommand("inspect-heads", "head words recovered from head vectors");
  heads_cmd->add_option("--checkpoint", o.checkpoint)->check(CLI::ExistingFile);
  heads_cmd->add_option("--input", o.input)->check(CLI::ExistingFile);
  heads_cmd->add_flag("--json", o.json_only, "JSON lines instead of the rendering");
  heads_cmd->add_flag("--allow-nary", o.allow_nary);

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check on random trees");
  grad_cmd->add_option("--variant", o.variant, "a model variant or 'reranker'");
  grad_cmd->add_option("--strategy", o.strategy);
  grad_cmd->add_option("--dims", o.dims, "embedding x hidden");
  grad_cmd->add_option("--out-hidden", o.check_out_hidden);
  grad_cmd->add_option("--tol", o.tol);
  grad_cmd->add_option("--trees", o.trees);
  grad_cmd->add_option("--l2", o.l2);

  auto* count_cmd = app.add_subcommand("count-params", "trainable parameters per group");
  add_model_flags(count_cmd, o);
  count_cmd->add_option("--classes", o.classes);

  auto* compare_cmd = app.add_subcommand("compare-strategies", "L / R / A / G under one protocol");
  add_train_flags(compare_cmd, o);
  compare_cmd->add_flag("--zero-gate-control", o.zero_gate_control, "add G with a zero frozen gate");

  auto* rerank_cmd = app.add_subcommand("rerank-score", "rerank k-best parses");
  add_model_flags(rerank_cmd, o);
  rerank_cmd->add_option("--candidates", o.candidates, "blocks of score<TAB>tree")->check(CLI::ExistingFile);
  rerank_cmd->add_option("--gold", o.gold, "gold trees for F1")->check(CLI::ExistingFile);
  rerank_cmd->add_option("--train-candidates", o.train_candidates)->check(CLI::ExistingFile);
  rerank_cmd->add_option("--train-gold", o.train_gold)->check(CLI::ExistingFile);
  rerank_cmd->add_option("--checkpoint", o.checkpoint)->check(CLI::ExistingFile);
  rerank_cmd->add_option("--embeddings", o.embeddings)->check(CLI::ExistingFile);
  rerank_cmd->add_option("--alpha", o.alpha, "weight of the model score");
  rerank_cmd->add_option("--margin-scale", o.margin_scale);
  rerank_cmd->add_option("--epochs", o.epochs);
  rerank_cmd->add_option("--lr", o.lr);
  rerank_cmd->add_option("--out", o.out);

  for (auto* sub : app.get_subcommands({}))
    sub->add_option("--config", config_path, "key=value file; command-line flags win")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (!config_path.empty()) merge_config(sub, config_path);
    const std::string name = sub->get_name();
    if (name == "train") return cmd_train(o, sub);
    if (name == "eval") return cmd_eval(o, sub);
    if (name == "predict") return cmd_predict(o);
    if (name == "inspect-heads") return cmd_inspect_heads(o);
    if (name == "gradcheck") return cmd_gradcheck(o);
    if (name == "count-params") return cmd_count_params(o);
    if (name == "compare-strategies") return cmd_compare(o);
    if (name == "rerank-score") return cmd_rerank(o);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
