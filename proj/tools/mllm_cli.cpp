// Command-line front end: parameter accounting, depth/width sweeps, training,
// evaluation, quantization, cost estimates and generation.
//
// Exit codes: 0 success, 2 invalid input or usage, 3 runtime failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mllm/mllm.hpp"

using json = nlohmann::json;
using namespace mllm;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

std::string human_count(double n) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  if (n >= 1e9) os << n / 1e9 << "B";
  else os << n / 1e6 << "M";
  return os.str();
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("MLLM_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("MLLM_SEED must be an unsigned integer, got '") + env + "'");
  }
  return 0;
}

// Parses "1,2,3" (spaces allowed) into integers.
template <typename Int>
std::vector<Int> parse_list(const std::string& text, const char* what) {
  std::vector<Int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    if (b == std::string::npos) continue;
    item = item.substr(b, item.find_last_not_of(' ') - b + 1);
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || v < 0) throw ConfigError(std::string("bad ") + what + " entry '" + item + "'");
    out.push_back(static_cast<Int>(v));
  }
  if (out.empty()) throw ConfigError(std::string(what) + " list is empty");
  return out;
}

ModelConfig load_model_config(const std::string& path) {
  auto c = load_config_file(path).model();
  require_valid(c);
  return c;
}

void write_json(const json& j) { std::cout << j.dump(2) << "\n"; }

// ---- count-params -------------------------------------------------------

struct CountArgs {
  std::string config;
  bool json = false;
};

int run_count(const CountArgs& a) {
  const auto c = load_model_config(a.config);
  const auto p = count_params(c);
  if (a.json) {
    write_json({{"embedding", p.embedding},
                {"blocks", p.blocks},
                {"norms", p.norms},
                {"total", p.total()},
                {"executed_layers", c.executed_layers()}});
    return 0;
  }
  std::cout << "embedding  " << p.embedding << "\n"
            << "blocks     " << p.blocks << "\n"
            << "norms      " << p.norms << "\n"
            << "total      " << p.total() << " (" << human_count(static_cast<double>(p.total())) << ")\n";
  return 0;
}

// ---- sweep --------------------------------------------------------------

struct SweepArgs {
  double budget = 0;
  std::string depths;
  std::size_t head_dim = kDefaultHeadDim;
  std::size_t vocab = 32000;
  bool share_emb = false;
  std::string out;
};

int run_sweep(const SweepArgs& a) {
  if (!(a.budget > 0)) throw ConfigError("--budget must be positive");
  SweepOptions opt;
  opt.head_dim = a.head_dim;
  opt.vocab_size = a.vocab;
  opt.share_embeddings = a.share_emb;
  const auto budget = static_cast<std::uint64_t>(a.budget);
  const auto r = enumerate_depth_width(budget, parse_list<std::size_t>(a.depths, "depths"), opt);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";

  std::ofstream out(a.out);
  if (!out) throw std::runtime_error("cannot write '" + a.out + "'");
  out << "depth,heads,kv_heads,dim,hidden,params,params_m,budget_delta_pct\n";
  for (const auto& c : r.configs) {
    const auto n = count_params(c).total();
    out << c.n_layers << ',' << c.n_heads << ',' << c.n_kv_heads << ',' << c.embed_dim << ',' << c.hidden_dim << ','
        << n << ',' << std::fixed << std::setprecision(1) << static_cast<double>(n) / 1e6 << ','
        << std::setprecision(2) << (static_cast<double>(n) / static_cast<double>(budget) - 1.0) * 100.0 << '\n';
    out.unsetf(std::ios::fixed);
  }
  std::cout << r.configs.size() << " configs written to " << a.out << "\n";
  return 0;
}

// ---- train --------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string data;
  std::size_t steps = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::string> kd_teacher;
  std::optional<std::string> report;
};

int run_train(const TrainArgs& a) {
  const auto file = load_config_file(a.config);
  auto config = file.model();
  require_valid(config);
  TrainPlan defaults;
  defaults.warmup_steps = TrainPlan::default_warmup(a.steps);
  auto plan = file.train(defaults);
  plan.total_steps = a.steps;
  plan.seed = resolve_seed(a.seed);
  plan.kd_teacher = a.kd_teacher;
  if (plan.seq_len > config.context_len) plan.seq_len = config.context_len;
  if (a.steps > 0) validate_plan(plan);

  const auto stream = load_token_stream(a.data);
  if (stream.vocab_size > config.vocab_size)
    throw ConfigError("data vocabulary " + std::to_string(stream.vocab_size) + " exceeds model vocabulary " +
                      std::to_string(config.vocab_size));

  auto model = Model<float>::init(config, plan.seed);
  std::optional<Model<float>> teacher;
  if (plan.kd_teacher) {
    teacher = load_checkpoint(*plan.kd_teacher);
    if (teacher->config().vocab_size != config.vocab_size) throw ConfigError("teacher vocabulary differs from student");
  }

  std::ofstream report;
  if (a.report) {
    report.open(*a.report);
    if (!report) throw std::runtime_error("cannot write '" + *a.report + "'");
    report << "step,loss,lm_loss,kd_loss,lr,grad_norm\n" << std::setprecision(9);
  }

  if (a.steps > 0) {
    BatchSampler sampler(stream.tokens, plan.batch_size, plan.seq_len, plan.seed + 1);
    AdamW<float> opt(model);
    StepResult r;
    for (std::size_t s = 0; s < plan.total_steps; ++s) {
      r = train_step(model, sampler.next(), plan, opt, s, teacher ? &*teacher : nullptr);
      if (report) report << s << ',' << r.loss << ',' << r.lm << ',' << r.kd << ',' << r.lr << ',' << r.grad_norm << '\n';
    }
    std::cout << "final loss " << r.loss << " after " << plan.total_steps << " steps\n";
  }
  save_checkpoint(model, a.out);
  std::cout << "checkpoint written to " << a.out << "\n";
  return 0;
}

// ---- eval ---------------------------------------------------------------

struct EvalArgs {
  std::string ckpt;
  std::optional<std::string> data;
  std::optional<std::string> mc;
  bool json = false;
};

// Text fields are byte-tokenized; arrays are taken as token ids.
std::vector<TokenId> tokens_of(const json& v) {
  if (v.is_string()) return ByteTokenizer::encode(v.get<std::string>());
  if (v.is_array()) return v.get<std::vector<TokenId>>();
  throw FormatError("expected a string or an array of token ids");
}

int run_eval(const EvalArgs& a) {
  const auto model = load_checkpoint(a.ckpt);
  if (a.data) {
    const auto stream = load_token_stream(*a.data);
    const ModelScorer<float> scorer(model);
    const auto t = stream_nll(scorer, std::span<const TokenId>(stream.tokens));
    const double ppl = std::exp(t.nll / static_cast<double>(t.count));
    if (a.json) write_json({{"perplexity", ppl}, {"tokens", t.count}, {"mean_nll", t.nll / t.count}});
    else std::cout << "perplexity " << ppl << " over " << t.count << " tokens\n";
    return 0;
  }

  std::istringstream lines(read_file(*a.mc));
  std::string line;
  std::size_t n = 0, correct = 0, line_no = 0;
  json records = json::array();
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
      const auto context = tokens_of(rec.at("context"));
      std::vector<std::vector<TokenId>> choices;
      for (const auto& c : rec.at("choices")) choices.push_back(tokens_of(c));
      const auto gold = rec.at("gold").get<std::size_t>();
      if (gold >= choices.size()) throw FormatError("gold index out of range");
      const auto r = mc_score(model, context, choices);
      correct += r.best == gold;
      ++n;
      records.push_back({{"line", line_no}, {"pred", r.best}, {"gold", gold}, {"scores", r.scores}});
    } catch (const json::exception& e) {
      throw FormatError("mc line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (n == 0) throw FormatError("no multiple-choice records in '" + *a.mc + "'");
  const double acc = static_cast<double>(correct) / static_cast<double>(n);
  if (a.json) write_json({{"accuracy", acc}, {"correct", correct}, {"total", n}, {"records", records}});
  else std::cout << "accuracy " << acc << " (" << correct << "/" << n << ")\n";
  return 0;
}

// ---- quantize -----------------------------------------------------------

struct QuantizeArgs {
  std::string ckpt;
  std::string out;
};

int run_quantize(const QuantizeArgs& a) {
  const auto model = load_checkpoint(a.ckpt);
  const auto q = ptq_model(model);
  json tensors = json::array();
  const auto before = model.parameters();
  const auto after = q.parameters();
  for (std::size_t i = 0; i < before.size(); ++i) {
    auto it = q.weight_codes.find(before[i].name);
    if (it == q.weight_codes.end()) continue;
    double max_err = 0, sum_err = 0;
    const auto x = before[i].tensor.data(), y = after[i].tensor.data();
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double e = std::abs(static_cast<double>(x[k]) - static_cast<double>(y[k]));
      max_err = std::max(max_err, e);
      sum_err += e;
    }
    const auto& s = it->second.scale;
    tensors.push_back({{"name", before[i].name},
                       {"slices", it->second.slice_count()},
                       {"max_abs_error", max_err},
                       {"mean_abs_error", sum_err / static_cast<double>(x.size())},
                       {"max_half_scale", *std::max_element(s.begin(), s.end()) / 2}});
  }
  save_checkpoint(q, a.out);
  write_json({{"output", a.out}, {"tensors", tensors}});
  return 0;
}

// ---- cost ---------------------------------------------------------------

struct CostArgs {
  std::optional<std::string> config;
  std::optional<std::string> hardware;
  std::optional<double> params;
  double rate = 10.0;
  bool json = false;
};

struct FleetArgs {
  double population = 7.88e9;
  double usage = 0.05;
  double flops_per_token = 220e9;
  double tokens_per_s = 50;
  double gpu_flops = 60e12;
  bool json = false;
};

int run_cost(const CostArgs& a) {
  if (!a.config && !a.params) throw ConfigError("cost needs --config or --params");
  CostEnvelope env;
  std::optional<ModelConfig> config;
  if (a.config) {
    const auto file = load_config_file(*a.config);
    if (file.has_section("hardware")) env = file.hardware();
    config = file.model();
    require_valid(*config);
  }
  if (a.hardware) env = load_config_file(*a.hardware).hardware();
  env.validate();

  const double params = a.params ? *a.params : static_cast<double>(count_params(*config).total());
  if (params < 0) throw ValueError("--params must be >= 0");
  const double energy = energy_per_token(params, env);
  const double runtime = battery_runtime(env, params, a.rate);
  json j = {{"params", params},
            {"energy_per_token_j", energy},
            {"tokens_per_s", a.rate},
            {"battery_joules", env.battery_joules},
            {"runtime_s", std::isinf(runtime) ? json(nullptr) : json(runtime)},
            {"runtime_h", std::isinf(runtime) ? json(nullptr) : json(runtime / 3600.0)}};
  std::optional<WeightTraffic> traffic;
  if (config) {
    traffic = weight_traffic_per_token(*config, env);
    j["traffic"] = {{"dram_bytes", traffic->dram_bytes},
                    {"executed_layers", traffic->executed_layers},
                    {"block_fetches", traffic->fetches},
                    {"forced_refetches", traffic->forced_refetches},
                    {"seconds", traffic->seconds ? json(*traffic->seconds) : json(nullptr)}};
  }
  if (a.json) {
    write_json(j);
    return 0;
  }
  std::cout << "params            " << params << " (" << human_count(params) << ")\n"
            << "energy per token  " << energy << " J\n"
            << "battery runtime   ";
  if (std::isinf(runtime)) std::cout << "unbounded\n";
  else std::cout << runtime << " s (" << runtime / 3600.0 << " h) at " << a.rate << " tokens/s\n";
  if (traffic) {
    std::cout << "executed layers   " << traffic->executed_layers << "\n"
              << "DRAM bytes/token  " << traffic->dram_bytes << " (" << traffic->fetches << " block fetches, "
              << traffic->forced_refetches << " forced)\n";
    if (traffic->seconds) std::cout << "weight load time  " << *traffic->seconds << " s/token\n";
  }
  return 0;
}

int run_fleet(const FleetArgs& a) {
  const double n = fleet_gpus(a.population, a.usage, a.flops_per_token, a.tokens_per_s, a.gpu_flops);
  if (a.json) {
    write_json({{"population", a.population},
                {"usage_fraction", a.usage},
                {"flops_per_token", a.flops_per_token},
                {"tokens_per_s", a.tokens_per_s},
                {"gpu_flops_per_s", a.gpu_flops},
                {"gpus", n}});
  } else {
    std::cout << "gpus " << n << "\n";
  }
  return 0;
}

// ---- generate -----------------------------------------------------------

struct GenerateArgs {
  std::string ckpt;
  std::string prompt;
  std::size_t n = 0;
  double temperature = 0.0;
  std::optional<std::uint64_t> seed;
};

int run_generate(const GenerateArgs& a) {
  const auto model = load_checkpoint(a.ckpt);
  const auto prompt = parse_list<TokenId>(a.prompt, "prompt-tokens");
  for (auto t : prompt)
    if (static_cast<std::size_t>(t) >= model.config().vocab_size)
      throw IndexError("prompt token " + std::to_string(t) + " outside vocabulary");
  const auto out = generate(model, prompt, a.n, a.temperature, resolve_seed(a.seed));
  for (std::size_t i = 0; i < out.size(); ++i) std::cout << (i ? "," : "") << out[i];
  std::cout << "\n";
  return 0;
}

bool is_validation_error(const std::exception& e) {
  return dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ValueError*>(&e) ||
         dynamic_cast<const DimensionError*>(&e) || dynamic_cast<const IndexError*>(&e) ||
         dynamic_cast<const LengthError*>(&e) || dynamic_cast<const FormatError*>(&e);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sub-billion decoder language model toolkit"};
  app.require_subcommand(1);
  std::function<int()> action;

  CountArgs count;
  auto* c = app.add_subcommand("count-params", "Exact parameter count of a model config");
  c->add_option("--config", count.config, "Model config file")->required()->check(CLI::ExistingFile);
  c->add_flag("--json", count.json, "Print JSON");
  c->callback([&] { action = [&] { return run_count(count); }; });

  SweepArgs sweep;
  auto* s = app.add_subcommand("sweep", "Depth-vs-width grid under a parameter budget");
  s->add_option("--budget", sweep.budget, "Parameter budget, e.g. 134e6")->required();
  s->add_option("--depths", sweep.depths, "Comma-separated depths")->required();
  s->add_option("--head-dim", sweep.head_dim, "Head dimension")->check(CLI::PositiveNumber);
  s->add_option("--vocab", sweep.vocab, "Vocabulary size")->check(CLI::PositiveNumber);
  s->add_flag("--share-emb", sweep.share_emb, "Tie input and output embeddings");
  s->add_option("--out", sweep.out, "CSV output path")->required();
  s->callback([&] { action = [&] { return run_sweep(sweep); }; });

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model from scratch");
  t->add_option("--config", train.config, "Model config file")->required()->check(CLI::ExistingFile);
  t->add_option("--data", train.data, "Token stream or raw text file")->required()->check(CLI::ExistingFile);
  t->add_option("--steps", train.steps, "Optimizer steps")->required();
  t->add_option("--seed", train.seed, "Seed (default: MLLM_SEED or 0)");
  t->add_option("--out", train.out, "Checkpoint output path")->required();
  t->add_option("--kd-teacher", train.kd_teacher, "Teacher checkpoint for distillation")->check(CLI::ExistingFile);
  t->add_option("--report", train.report, "Per-step CSV log");
  t->callback([&] { action = [&] { return run_train(train); }; });

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Perplexity or multiple-choice accuracy");
  e->add_option("--ckpt", eval.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  auto* data_opt = e->add_option("--data", eval.data, "Token stream or raw text file")->check(CLI::ExistingFile);
  auto* mc_opt = e->add_option("--mc", eval.mc, "JSONL multiple-choice file")->check(CLI::ExistingFile);
  data_opt->excludes(mc_opt);
  e->add_flag("--json", eval.json, "Print JSON");
  e->callback([&] {
    if (!eval.data && !eval.mc) throw CLI::RequiredError("--data or --mc");
    action = [&] { return run_eval(eval); };
  });

  QuantizeArgs quant;
  auto* q = app.add_subcommand("quantize", "Simulated W8A8 post-training quantization");
  q->add_option("--ckpt", quant.ckpt, "Input checkpoint")->required()->check(CLI::ExistingFile);
  q->add_option("--out", quant.out, "Quantized checkpoint output path")->required();
  q->callback([&] { action = [&] { return run_quantize(quant); }; });

  CostArgs cost;
  auto* k = app.add_subcommand("cost", "Energy, battery runtime and weight traffic");
  k->add_option("--config", cost.config, "Model config file")->check(CLI::ExistingFile);
  k->add_option("--hardware", cost.hardware, "Config file with a [hardware] section")->check(CLI::ExistingFile);
  k->add_option("--params", cost.params, "Parameter count (instead of --config)");
  k->add_option("--rate", cost.rate, "Tokens per second")->check(CLI::PositiveNumber);
  k->add_flag("--json", cost.json, "Print JSON");
  k->require_subcommand(0, 1);
  k->callback([&] {
    if (!action) action = [&] { return run_cost(cost); };
  });

  FleetArgs fleet;
  auto* f = k->add_subcommand("fleet", "Accelerators needed to serve a population");
  f->add_option("--population", fleet.population, "People served");
  f->add_option("--usage", fleet.usage, "Fraction of the day each person generates");
  f->add_option("--flops-per-token", fleet.flops_per_token, "FLOPs per generated token");
  f->add_option("--tokens-per-s", fleet.tokens_per_s, "Generation rate per person");
  f->add_option("--gpu-flops", fleet.gpu_flops, "Sustained FLOP/s per accelerator");
  f->add_flag("--json", fleet.json, "Print JSON");
  f->callback([&] { action = [&] { return run_fleet(fleet); }; });

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Continue a prompt");
  g->add_option("--ckpt", gen.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  g->add_option("--prompt-tokens", gen.prompt, "Comma-separated token ids")->required();
  g->add_option("--n", gen.n, "Tokens to generate")->required();
  g->add_option("--temperature", gen.temperature, "0 for greedy")->check(CLI::NonNegativeNumber);
  g->add_option("--seed", gen.seed, "Sampling seed (default: MLLM_SEED or 0)");
  g->callback([&] { action = [&] { return run_generate(gen); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    return action();
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return is_validation_error(ex) ? kExitUsage : kExitRuntime;
  }
}
