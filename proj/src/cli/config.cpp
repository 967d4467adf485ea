#include "adcare/cli/config.h"

#include <charconv>
#include <functional>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "adcare/data/synthetic.h"
#include "adcare/error.h"

namespace adcare::cli {

namespace {

namespace pt = boost::property_tree;

std::string where;  // "section.key" of the value being parsed, for messages

[[noreturn]] void bad(const std::string& value, const char* what) {
  throw ConfigError("config key '" + where + "': '" + value + "' is not " + what);
}

double to_double(const std::string& s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad(s, "a number");
  return v;
}

std::uint64_t to_uint(const std::string& s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad(s, "a non-negative integer");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  bad(s, "true or false");
}

std::vector<std::string> to_list(const std::string& s) {
  std::vector<std::string> out;
  if (boost::trim_copy(s).empty()) return out;
  boost::split(out, s, boost::is_any_of(","));
  for (auto& x : out) boost::trim(x);
  return out;
}

std::string num(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string num(std::uint64_t v) { return std::to_string(v); }
std::string flag(bool v) { return v ? "true" : "false"; }

template <class T, class F>
std::string join(const std::vector<T>& xs, F fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + fmt(xs[i]);
  return out;
}

std::vector<double> doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& x : to_list(s)) out.push_back(to_double(x));
  return out;
}

struct Key {
  const char* section;
  const char* name;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

// Accessors hand out a mutable reference; getters only read through it.
template <class M>
Key size_key(const char* section, const char* name, M member) {
  return {section, name, [member](const PipelineConfig& c) { return num(std::uint64_t(member(const_cast<PipelineConfig&>(c)))); },
          [member](PipelineConfig& c, const std::string& s) { member(c) = to_uint(s); }};
}

template <class M>
Key real_key(const char* section, const char* name, M member) {
  return {section, name, [member](const PipelineConfig& c) { return num(double(member(const_cast<PipelineConfig&>(c)))); },
          [member](PipelineConfig& c, const std::string& s) { member(c) = to_double(s); }};
}

template <class M>
Key bool_key(const char* section, const char* name, M member) {
  return {section, name, [member](const PipelineConfig& c) { return flag(member(const_cast<PipelineConfig&>(c))); },
          [member](PipelineConfig& c, const std::string& s) { member(c) = to_bool(s); }};
}

template <class M>
Key text_key(const char* section, const char* name, M member) {
  return {section, name, [member](const PipelineConfig& c) { return std::string(member(const_cast<PipelineConfig&>(c))); },
          [member](PipelineConfig& c, const std::string& s) { member(c) = s; }};
}

// Keys shared by the two training sections.
void train_keys(std::vector<Key>& keys, const char* section,
                training::TrainConfig& (*stage)(PipelineConfig&)) {
  auto m = [stage](auto field) {
    return [stage, field](PipelineConfig& c) -> auto& { return stage(c).*field; };
  };
  using T = training::TrainConfig;
  keys.push_back(real_key(section, "learning_rate", m(&T::learning_rate)));
  keys.push_back(size_key(section, "batch_size", m(&T::batch_size)));
  keys.push_back(size_key(section, "epochs", m(&T::epochs)));
  keys.push_back(real_key(section, "weight_decay", m(&T::weight_decay)));
  keys.push_back(real_key(section, "warmup_ratio", m(&T::warmup_ratio)));
  keys.push_back(text_key(section, "schedule", m(&T::schedule)));
  keys.push_back(size_key(section, "max_steps", m(&T::max_steps)));
  keys.push_back(real_key(section, "grad_clip", m(&T::grad_clip)));
}

training::TrainConfig& pretrain_of(PipelineConfig& c) { return c.experiment.pretrain; }
training::TrainConfig& finetune_of(PipelineConfig& c) { return c.experiment.finetune; }

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    auto e = [](auto field) {
      return [field](PipelineConfig& c) -> auto& { return c.experiment.*field; };
    };
    auto corpus = [](auto field) {
      return [field](PipelineConfig& c) -> auto& { return c.experiment.corpus.*field; };
    };
    auto geometry = [](auto field) {
      return [field](PipelineConfig& c) -> auto& { return c.experiment.corpus.geometry.*field; };
    };
    auto decoder = [](auto field) {
      return [field](PipelineConfig& c) -> auto& { return c.experiment.decoder.*field; };
    };
    auto align = [](auto field) {
      return [field](PipelineConfig& c) -> auto& { return c.experiment.prealign.*field; };
    };
    auto bal = [](auto field) {
      return [field](PipelineConfig& c) -> auto& { return c.experiment.balancing.*field; };
    };

    k.push_back(size_key("run", "seed", [](PipelineConfig& c) -> auto& { return c.seed; }));
    k.push_back(text_key("run", "arm", [](PipelineConfig& c) -> auto& { return c.arm; }));
    k.push_back({"run", "modes",
                 [](const PipelineConfig& c) {
                   return join(c.modes, [](training::TuneMode m) { return std::string(training::to_string(m)); });
                 },
                 [](PipelineConfig& c, const std::string& s) {
                   c.modes.clear();
                   for (const auto& x : to_list(s)) c.modes.push_back(training::parse_mode(x));
                 }});
    k.push_back(text_key("run", "judge", [](PipelineConfig& c) -> auto& { return c.judge; }));
    k.push_back(text_key("run", "judge_command",
                         [](PipelineConfig& c) -> auto& { return c.judge_command; }));
    k.push_back({"run", "ablation_seeds",
                 [](const PipelineConfig& c) { return join(c.ablation_seeds, [](std::uint64_t s) { return num(s); }); },
                 [](PipelineConfig& c, const std::string& s) {
                   c.ablation_seeds.clear();
                   for (const auto& x : to_list(s)) c.ablation_seeds.push_back(to_uint(x));
                 }});

    using CC = data::CorpusConfig;
    using G = encoder::FrameGeometry;
    k.push_back(size_key("corpus", "n", corpus(&CC::n)));
    k.push_back({"corpus", "distribution",
                 [](const PipelineConfig& c) {
                   const auto& d = c.experiment.corpus.distribution;
                   return join(std::vector<double>(d.begin(), d.end()), [](double x) { return num(x); });
                 },
                 [](PipelineConfig& c, const std::string& s) {
                   const auto v = doubles(s);
                   if (v.size() != 3) bad(s, "three class shares (positive, negative, ambiguous)");
                   std::copy(v.begin(), v.end(), c.experiment.corpus.distribution.begin());
                 }});
    k.push_back(size_key("corpus", "frames", geometry(&G::frames)));
    k.push_back(size_key("corpus", "height", geometry(&G::height)));
    k.push_back(size_key("corpus", "width", geometry(&G::width)));
    k.push_back(size_key("corpus", "channels", geometry(&G::channels)));
    k.push_back(size_key("corpus", "patch_size", geometry(&G::patch_size)));
    k.push_back(size_key("corpus", "records_per_patient", corpus(&CC::records_per_patient)));
    k.push_back(size_key("corpus", "disputed", corpus(&CC::disputed)));
    k.push_back(real_key("corpus", "noise", corpus(&CC::noise)));
    k.push_back(size_key("corpus", "clutter", corpus(&CC::clutter)));
    k.push_back(real_key("corpus", "negative_dark_fraction", corpus(&CC::negative_dark_fraction)));

    using D = decoder::DecoderConfig;
    k.push_back(size_key("model", "embed_dim", e(&eval::ExperimentConfig::embed_dim)));
    k.push_back(size_key("model", "dim", decoder(&D::dim)));
    k.push_back(size_key("model", "heads", decoder(&D::heads)));
    k.push_back(size_key("model", "blocks", decoder(&D::blocks)));
    k.push_back(size_key("model", "ffn_hidden", decoder(&D::ffn_hidden)));
    k.push_back(size_key("model", "max_positions", decoder(&D::max_positions)));

    k.push_back(real_key("split", "ratio", e(&eval::ExperimentConfig::split_ratio)));

    k.push_back(bool_key("balance", "enabled", e(&eval::ExperimentConfig::balance)));
    k.push_back({"balance", "target",
                 [](const PipelineConfig& c) {
                   const auto& t = c.experiment.balancing.target;
                   return join(std::vector<double>(t.begin(), t.end()), [](double x) { return num(x); });
                 },
                 [](PipelineConfig& c, const std::string& s) {
                   const auto v = doubles(s);
                   if (v.size() != 3) bad(s, "three class shares (positive, negative, ambiguous)");
                   std::copy(v.begin(), v.end(), c.experiment.balancing.target.begin());
                 }});
    k.push_back(size_key("balance", "k", bal(&data::BalanceConfig::k)));
    k.push_back(bool_key("balance", "vanilla", bal(&data::BalanceConfig::vanilla)));

    using A = encoder::AlignmentConfig;
    k.push_back(size_key("prealign", "steps", align(&A::steps)));
    k.push_back(real_key("prealign", "learning_rate", align(&A::learning_rate)));
    k.push_back(size_key("prealign", "batch_size", align(&A::batch_size)));
    k.push_back(real_key("prealign", "temperature", align(&A::temperature)));
    k.push_back(bool_key("prealign", "train_visual", align(&A::train_visual)));
    k.push_back(bool_key("prealign", "train_text", align(&A::train_text)));
    k.push_back(bool_key("prealign", "masked_token_loss", align(&A::masked_token_loss)));
    k.push_back(real_key("prealign", "mask_ratio", align(&A::mask_ratio)));
    k.push_back(real_key("prealign", "masked_token_weight", align(&A::masked_token_weight)));

    using T = training::TrainConfig;
    train_keys(k, "pretrain", pretrain_of);
    k.push_back(bool_key("pretrain", "train_word_embeddings",
                         [](PipelineConfig& c) -> auto& {
                           return c.experiment.pretrain.train_word_embeddings;
                         }));
    train_keys(k, "finetune", finetune_of);
    auto ft = [](auto field) {
      return [field](PipelineConfig& c) -> auto& { return c.experiment.finetune.*field; };
    };
    k.push_back(size_key("finetune", "lora_rank", ft(&T::lora_rank)));
    k.push_back(real_key("finetune", "lora_alpha", ft(&T::lora_alpha)));
    k.push_back(real_key("finetune", "loss_temperature", ft(&T::loss_temperature)));
    k.push_back({"finetune", "class_weights",
                 [](const PipelineConfig& c) {
                   return join(c.experiment.finetune.class_weights, [](double x) { return num(x); });
                 },
                 [](PipelineConfig& c, const std::string& s) {
                   auto v = doubles(s);
                   if (!v.empty() && v.size() != 3) bad(s, "empty or three class weights");
                   c.experiment.finetune.class_weights = std::move(v);
                 }});
    k.push_back(size_key("finetune", "chat_rounds", e(&eval::ExperimentConfig::chat_rounds)));

    k.push_back({"eval", "dimensions",
                 [](const PipelineConfig& c) {
                   return join(c.experiment.dimensions, [](const std::string& d) { return d; });
                 },
                 [](PipelineConfig& c, const std::string& s) { c.experiment.dimensions = to_list(s); }});
    k.push_back(size_key("eval", "max_answer_tokens", e(&eval::ExperimentConfig::max_answer_tokens)));
    return k;
  }();
  return keys;
}

}  // namespace

PipelineConfig parse_config(const std::string& ini_text) {
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("malformed config at line " + std::to_string(e.line()) + ": " + e.message());
  }
  PipelineConfig c;
  const auto& keys = registry();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("config key '" + section + "' outside a section");
    for (const auto& [name, value] : body) {
      auto it = std::find_if(keys.begin(), keys.end(),
                             [&](const Key& k) { return k.section == section && k.name == name; });
      if (it == keys.end()) throw ConfigError("unknown config key '" + section + "." + name + "'");
      where = section + "." + name;
      it->set(c, boost::trim_copy(value.data()));
    }
  }
  validate(c);
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse_config(data::read_text(path));
}

std::string config_to_ini(const PipelineConfig& c) {
  std::string out;
  std::string section;
  for (const auto& k : registry()) {
    if (section != k.section) {
      if (!section.empty()) out += "\n";
      section = k.section;
      out += "[" + section + "]\n";
    }
    const auto value = k.get(c);
    out += std::string(k.name) + (value.empty() ? " =\n" : " = " + value + "\n");
  }
  return out;
}

void validate(const PipelineConfig& c) {
  const auto& e = c.experiment;
  if (c.arm != "unified" && c.arm != "separated") throw ConfigError("run.arm must be unified or separated");
  if (c.judge != "rule" && c.judge != "external") throw ConfigError("run.judge must be rule or external");
  if (c.judge == "external" && c.judge_command.empty()) throw ConfigError("run.judge_command is empty");
  if (c.modes.empty()) throw ConfigError("run.modes is empty");
  if (e.corpus.n < 10) throw ConfigError("corpus.n must be at least 10");
  encoder::validate_geometry(e.corpus.geometry);
  if (!(e.split_ratio > 0.0 && e.split_ratio < 1.0)) throw ConfigError("split.ratio must be in (0, 1)");
  if (e.embed_dim == 0) throw ConfigError("model.embed_dim must be positive");
  if (e.decoder.heads == 0 || e.decoder.dim % e.decoder.heads != 0) {
    throw ConfigError("model.dim must be a positive multiple of model.heads");
  }
  if (e.balancing.k == 0) throw ConfigError("balance.k must be at least 1");
  if (e.prealign.batch_size < 2) throw ConfigError("prealign.batch_size must be at least 2");
  if (!(e.prealign.temperature > 0.0)) throw ConfigError("prealign.temperature must be positive");
  if (e.chat_rounds == 0) throw ConfigError("finetune.chat_rounds must be at least 1");
  for (const auto& d : e.dimensions) {
    if (std::find(data::kDimensions.begin(), data::kDimensions.end(), d) == data::kDimensions.end()) {
      throw ConfigError("unknown evaluation dimension '" + d + "'");
    }
  }
  auto pre = e.pretrain;
  pre.stage = training::Stage::pretrain;
  pre.mode = training::TuneMode::regular;
  training::validate(pre);
  auto fine = e.finetune;
  fine.stage = training::Stage::finetune;
  for (auto m : c.modes) {
    fine.mode = m;
    training::validate(fine);
  }
}

bool operator==(const training::TrainConfig& a, const training::TrainConfig& b) {
  return a.stage == b.stage && a.mode == b.mode && a.learning_rate == b.learning_rate &&
         a.batch_size == b.batch_size && a.epochs == b.epochs && a.weight_decay == b.weight_decay &&
         a.warmup_ratio == b.warmup_ratio && a.schedule == b.schedule && a.seed == b.seed &&
         a.class_weights == b.class_weights && a.loss_temperature == b.loss_temperature &&
         a.max_steps == b.max_steps && a.train_word_embeddings == b.train_word_embeddings &&
         a.lora_rank == b.lora_rank && a.lora_alpha == b.lora_alpha && a.grad_clip == b.grad_clip;
}

bool same_config(const PipelineConfig& a, const PipelineConfig& b) { return config_to_ini(a) == config_to_ini(b); }

}  // namespace adcare::cli
