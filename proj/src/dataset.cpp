// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "prunesearch/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "prunesearch/errors.hpp"
#include "prunesearch/file_util.hpp"
#include "prunesearch/rng.hpp"

namespace prunesearch {

using nlohmann::json;

namespace {

constexpr int kDatasetSchemaVersion = 1;

}  // namespace

TaskKind parse_task_kind(std::string_view name) {
  if (name == "classification") return TaskKind::classification;
  if (name == "regression") return TaskKind::regression;
  throw ConfigError("unknown task kind '" + std::string(name) + "'");
}

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::classification ? "classification" : "regression";
}

Dataset Dataset::subset(std::string_view tag) const {
  Dataset out{kind, vocab_size, num_classes, {}};
  for (const auto& e : examples)
    if (e.split == tag) out.examples.push_back(e);
  return out;
}

void Dataset::validate() const {
  if (vocab_size < 3) throw InputError("dataset vocab_size must be >= 3");
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& e = examples[i];
    if (e.token_ids.empty())
      throw InputError("example " + std::to_string(i) + " has no tokens");
    for (auto id : e.token_ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_size)
        throw InputError("example " + std::to_string(i) + ": token id " +
                         std::to_string(id) + " outside vocab of " +
                         std::to_string(vocab_size));
    }
    if (kind == TaskKind::classification &&
        (e.label < 0 || static_cast<std::size_t>(e.label) >= num_classes))
      throw InputError("example " + std::to_string(i) + ": label " +
                       std::to_string(e.label) + " outside " +
                       std::to_string(num_classes) + " classes");
    if (kind == TaskKind::regression && !std::isfinite(e.target))
      throw InputError("example " + std::to_string(i) + ": non-finite target");
  }
}

void SyntheticTaskSpec::validate() const {
  if (vocab_size < 3 || seq_len < 2 || num_examples < 1)
    throw ConfigError("synthetic task needs vocab >= 3, seq_len >= 2, examples >= 1");
  if (kind == TaskKind::classification && num_classes < 2)
    throw ConfigError("classification needs at least 2 classes");
  const std::size_t groups = kind == TaskKind::classification ? num_classes : 2;
  if (vocab_size - kFirstContentToken < groups + 1)
    throw ConfigError("vocabulary too small for the requested classes");
  if (!(signal_to_noise >= 0.0 && signal_to_noise <= 1.0))
    throw ConfigError("signal_to_noise must lie in [0, 1]");
  if (!(dev_fraction >= 0.0 && dev_fraction < 1.0))
    throw ConfigError("dev_fraction must lie in [0, 1)");
}

Dataset generate_synthetic_task(const SyntheticTaskSpec& spec) {
  spec.validate();
  const bool classify = spec.kind == TaskKind::classification;
  const std::size_t groups = classify ? spec.num_classes : 2;
  const std::size_t content = spec.vocab_size - kFirstContentToken;
  // Content token t belongs to group (t % (groups + 1)); the last residue
  // class is neutral.
  std::vector<std::vector<std::int32_t>> group_tokens(groups + 1);
  for (std::size_t t = 0; t < content; ++t)
    group_tokens[t % (groups + 1)].push_back(
        static_cast<std::int32_t>(t) + kFirstContentToken);

  Rng rng(spec.seed);
  Dataset data;
  data.kind = spec.kind;
  data.vocab_size = spec.vocab_size;
  data.num_classes = classify ? spec.num_classes : 1;
  const std::size_t num_train = spec.num_examples - static_cast<std::size_t>(
      std::floor(spec.dev_fraction * static_cast<double>(spec.num_examples)));
  const std::size_t min_len = std::max<std::size_t>(2, spec.seq_len / 2);

  for (std::size_t i = 0; i < spec.num_examples; ++i) {
    Example e;
    e.split = i < num_train ? "train" : "dev";
    const std::size_t len = min_len + rng.below(spec.seq_len - min_len + 1);
    e.token_ids.push_back(kClsToken);
    auto draw_uniform = [&] {
      return static_cast<std::int32_t>(rng.below(content)) + kFirstContentToken;
    };
    auto draw_group = [&](std::size_t g) {
      const auto& pool = group_tokens[g];
      return pool[rng.below(pool.size())];
    };
    if (classify) {
      e.label = static_cast<int>(rng.below(spec.num_classes));
      for (std::size_t s = 1; s < len; ++s) {
        e.token_ids.push_back(rng.bernoulli(0.5 * spec.signal_to_noise)
                                  ? draw_group(static_cast<std::size_t>(e.label))
                                  : draw_uniform());
      }
    } else {
      const double z = rng.uniform(-1.0, 1.0);
      const std::size_t g = z >= 0.0 ? 0 : 1;
      std::size_t n0 = 0, n1 = 0;
      for (std::size_t s = 1; s < len; ++s) {
        const auto tok = rng.bernoulli(std::fabs(z)) ? draw_group(g) : draw_uniform();
        const auto residue = static_cast<std::size_t>(tok - kFirstContentToken) %
                             (groups + 1);
        n0 += residue == 0;
        n1 += residue == 1;
        e.token_ids.push_back(tok);
      }
      const double share = (static_cast<double>(n0) - static_cast<double>(n1)) /
                           static_cast<double>(len - 1);
      const double noise = 0.5 * (1.0 - spec.signal_to_noise) * rng.normal();
      e.target = static_cast<float>(std::tanh(3.0 * share) + noise);
    }
    data.examples.push_back(std::move(e));
  }
  return data;
}

std::string dataset_to_text(const Dataset& data) {
  json j;
  j["format"] = "prunesearch-dataset";
  j["schema_version"] = kDatasetSchemaVersion;
  j["task"] = std::string(to_string(data.kind));
  j["vocab_size"] = data.vocab_size;
  j["num_classes"] = data.num_classes;
  json examples = json::array();
  for (const auto& e : data.examples) {
    json ej;
    ej["ids"] = e.token_ids;
    if (data.kind == TaskKind::classification)
      ej["label"] = e.label;
    else
      ej["label"] = static_cast<double>(e.target);
    ej["split"] = e.split;
    examples.push_back(std::move(ej));
  }
  j["examples"] = std::move(examples);
  return j.dump() + "\n";
}

Dataset dataset_from_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("dataset is not valid JSON: ") + e.what(),
                      static_cast<long long>(e.byte));
  }
  try {
    if (j.at("format").get<std::string>() != "prunesearch-dataset")
      throw FormatError("not a prunesearch dataset file");
    const int version = j.at("schema_version").get<int>();
    if (version != kDatasetSchemaVersion)
      throw FormatError("unsupported dataset schema version " +
                        std::to_string(version));
    Dataset d;
    d.kind = parse_task_kind(j.at("task").get<std::string>());
    d.vocab_size = j.at("vocab_size").get<std::size_t>();
    d.num_classes = j.at("num_classes").get<std::size_t>();
    for (const auto& ej : j.at("examples")) {
      Example e;
      e.token_ids = ej.at("ids").get<std::vector<std::int32_t>>();
      if (d.kind == TaskKind::classification) {
        if (!ej.at("label").is_number_integer())
          throw FormatError("classification label must be an integer");
        e.label = ej.at("label").get<int>();
      } else {
        e.target = static_cast<float>(ej.at("label").get<double>());
      }
      e.split = ej.at("split").get<std::string>();
      d.examples.push_back(std::move(e));
    }
    d.validate();
    return d;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed dataset: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed dataset: ") + e.what());
  }
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  data.validate();
  write_file_atomic(path, dataset_to_text(data));
}

Dataset read_dataset(const std::filesystem::path& path) {
  return dataset_from_text(read_file(path));
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  Batch batch;
  std::size_t len = 0;
  for (auto i : indices) len = std::max(len, data.examples.at(i).token_ids.size());
  std::vector<int> classes;
  std::vector<float> targets;
  for (auto i : indices) {
    const Example& e = data.examples[i];
    std::vector<std::int32_t> ids = e.token_ids;
    std::vector<std::uint8_t> mask(ids.size(), 1);
    ids.resize(len, kPadToken);
    mask.resize(len, 0);
    batch.token_ids.push_back(std::move(ids));
    batch.mask.push_back(std::move(mask));
    classes.push_back(e.label);
    targets.push_back(e.target);
  }
  if (data.kind == TaskKind::classification)
    batch.labels = std::move(classes);
  else
    batch.labels = std::move(targets);
  return batch;
}

std::vector<Batch> make_batches(const Dataset& data, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  std::vector<Batch> out;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i)
      idx.push_back(i);
    out.push_back(make_batch(data, idx));
  }
  return out;
}

EncoderConfig config_for(const Dataset& data, EncoderConfig base) {
  base.vocab_size = data.vocab_size;
  base.num_outputs = data.kind == TaskKind::classification ? data.num_classes : 1;
  std::size_t longest = 1;
  for (const auto& e : data.examples) longest = std::max(longest, e.token_ids.size());
  base.max_seq_len = std::max(base.max_seq_len, longest);
  return base;
}

}  // namespace prunesearch
