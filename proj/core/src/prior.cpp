#include "tacit/prior.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "tacit/util.hpp"

namespace tacit::prior {

using json = nlohmann::json;

std::string render_prior_prompt(int round, int rounds, int k, const std::vector<std::string>& earlier) {
  std::string prompt = judge::render_prompt(judge::builtin_template(judge::TemplateId::prior), {});
  if (round <= 1) return prompt;
  json list = earlier;
  prompt += "\n\nRound " + std::to_string(round) + " of " + std::to_string(rounds) +
            ". Hypotheses from earlier rounds:\n" + list.dump() + "\nGenerate " + std::to_string(k) +
            " new hypotheses distinct from these.";
  return prompt;
}

namespace {

// One simulation; nullopt when some round could not produce k distinct hypotheses.
std::optional<std::vector<PriorSample>> run_simulation(judge::JudgeClient& client, const PriorConfig& config,
                                                       int sim_id, int attempt) {
  std::vector<PriorSample> out;
  std::vector<std::string> earlier;
  std::set<std::string> seen;
  const auto k = static_cast<std::size_t>(config.k);
  auto enough = [k](const std::string& raw) { return search::parse_hypotheses(raw).size() >= k; };
  for (int round = 1; round <= config.rounds; ++round) {
    std::string prompt = render_prior_prompt(round, config.rounds, config.k, earlier);
    if (attempt > 0) prompt = judge::with_retry_marker(std::move(prompt), attempt);
    prompt = judge::with_nonce(std::move(prompt), sim_id);
    auto request = client.make_request(judge::TemplateId::prior, std::move(prompt), sim_id);
    auto [raw, valid] = client.complete(request, enough);
    int slot = 0;
    for (auto& text : search::parse_hypotheses(raw)) {
      if (slot == config.k) break;
      if (!seen.insert(text).second) continue;
      out.push_back({sim_id, round, slot++, text});
      earlier.push_back(text);
    }
    if (slot < config.k) return std::nullopt;
  }
  return out;
}

}  // namespace

std::string sample_to_json(const PriorSample& s) {
  return json({{"sim_id", s.sim_id}, {"round", s.round}, {"slot", s.slot}, {"text", s.text}}).dump();
}

std::vector<PriorSample> load_priors(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("priors file not found: " + path.string());
  std::vector<PriorSample> out;
  for (auto& line : read_lines(path)) {
    try {
      json j = json::parse(line.text);
      PriorSample s{j.at("sim_id").get<int>(), j.at("round").get<int>(), j.at("slot").get<int>(),
                    j.at("text").get<std::string>()};
      if (s.sim_id < 0 || s.round < 1 || s.slot < 0 || trim(s.text).empty()) {
        throw ValidationError("out-of-range prior sample");
      }
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line.number) + ": " + e.what());
    }
  }
  return out;
}

void save_priors(const std::filesystem::path& path, const std::vector<PriorSample>& samples) {
  std::string out;
  for (const auto& s : samples) out += sample_to_json(s) + "\n";
  write_file_atomic(path, out);
}

ElicitResult elicit_priors(judge::JudgeClient& client, const PriorConfig& config,
                           const std::optional<std::filesystem::path>& state_file, unsigned threads) {
  if (config.n_sims < 0 || config.rounds < 1 || config.k < 1) {
    throw ValidationError("prior config: n_sims >= 0, rounds >= 1 and k >= 1 required");
  }
  const auto per_sim = static_cast<std::size_t>(config.rounds * config.k);
  ElicitResult result;

  // Resume: keep only complete simulations from an earlier run.
  std::map<int, std::vector<PriorSample>> done;
  if (state_file && std::filesystem::exists(*state_file)) {
    for (auto& s : load_priors(*state_file)) done[s.sim_id].push_back(std::move(s));
    for (auto it = done.begin(); it != done.end();) {
      it = it->second.size() == per_sim ? std::next(it) : done.erase(it);
    }
    std::vector<PriorSample> kept;
    for (auto& [id, group] : done) kept.insert(kept.end(), group.begin(), group.end());
    save_priors(*state_file, kept);
  } else if (state_file) {
    save_priors(*state_file, {});
  }

  std::vector<int> todo;
  for (int sim = 0; sim < config.n_sims; ++sim) {
    if (!done.count(sim)) todo.push_back(sim);
  }
  const std::size_t chunk = std::max<std::size_t>(16, threads);
  for (std::size_t begin = 0; begin < todo.size(); begin += chunk) {
    const std::size_t n = std::min(chunk, todo.size() - begin);
    std::vector<std::optional<std::vector<PriorSample>>> out(n);
    std::vector<char> retried(n, 0);
    parallel_for(n, threads, [&](std::size_t i) {
      int sim = todo[begin + i];
      out[i] = run_simulation(client, config, sim, 0);
      if (!out[i]) {
        retried[i] = 1;
        out[i] = run_simulation(client, config, sim, 1);
      }
    });
    std::string appended;
    for (std::size_t i = 0; i < n; ++i) {
      int sim = todo[begin + i];
      if (retried[i]) result.retried_sims.push_back(sim);
      if (!out[i]) {
        result.excluded_sims.push_back(sim);
        continue;
      }
      for (const auto& s : *out[i]) appended += sample_to_json(s) + "\n";
      done[sim] = std::move(*out[i]);
    }
    if (state_file && !appended.empty()) {
      std::ofstream f(*state_file, std::ios::binary | std::ios::app);
      f << appended;
      if (!f.flush()) throw std::runtime_error("cannot append to " + state_file->string());
    }
  }
  for (auto& [id, group] : done) {
    if (id < config.n_sims) result.samples.insert(result.samples.end(), group.begin(), group.end());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Matchers

bool JudgeMatcher::matches(const search::Hypothesis& posterior, const std::string& prior_text) {
  return matches_text(posterior.text, prior_text);
}

bool JudgeMatcher::matches_text(const std::string& a_in, const std::string& b_in) {
  if (trim(a_in).empty() || trim(b_in).empty()) throw ValidationError("match: hypothesis text is empty");
  std::string a = normalize_space(a_in);
  std::string b = normalize_space(b_in);
  if (a == b) return true;
  if (b < a) std::swap(a, b);
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = memo_.find({a, b}); it != memo_.end()) return it->second;
  }
  std::string prompt = judge::render_prompt(judge::builtin_template(judge::TemplateId::match),
                                            {{"hypothesis", a}, {"prior_hypothesis", b}});
  auto request = client_.make_request(judge::TemplateId::match, std::move(prompt));
  auto [raw, valid] =
      client_.complete(request, [](const std::string& r) { return judge::parse_label_only(r).has_value(); });
  ++calls_;
  bool verdict = false;
  if (valid) {
    verdict = *judge::parse_label_only(raw) == 1;
  } else {
    ++flagged_;
  }
  std::lock_guard<std::mutex> lock(mu_);
  memo_.emplace(std::make_pair(a, b), verdict);
  return verdict;
}

Dictionary load_dictionary(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("dictionary not found: " + path.string());
  try {
    json j = json::parse(read_file(path));
    Dictionary d;
    for (auto& [id, words] : j.items()) {
      for (const auto& w : words) {
        std::string kw = to_lower(trim(w.get<std::string>()));
        if (kw.empty()) throw ValidationError("dictionary entry for " + id + " has an empty keyword");
        d[id].push_back(kw);
      }
    }
    return d;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

bool dictionary_hit(const std::vector<std::string>& keywords, const std::string& text) {
  std::string lower = to_lower(text);
  for (const auto& kw : keywords) {
    if (lower.find(to_lower(kw)) != std::string::npos) return true;
  }
  return false;
}

bool DictionaryMatcher::matches(const search::Hypothesis& posterior, const std::string& prior_text) {
  ++calls_;
  auto it = dictionary_.find(posterior.hyp_id);
  return it != dictionary_.end() && dictionary_hit(it->second, prior_text);
}

std::string_view to_string(CountMode mode) {
  return mode == CountMode::binary_window ? "binary_window" : "occurrence_rate";
}

std::vector<PriorFrequency> prior_frequency(const std::vector<search::Hypothesis>& posterior,
                                            const std::vector<PriorSample>& priors, Matcher& matcher,
                                            CountMode mode, unsigned threads) {
  std::vector<std::string> distinct;
  std::map<std::string, std::size_t> text_pos;
  std::map<int, std::vector<std::size_t>> windows;  // sim_id -> distinct-text positions
  for (const auto& s : priors) {
    auto [it, inserted] = text_pos.emplace(s.text, distinct.size());
    if (inserted) distinct.push_back(s.text);
    windows[s.sim_id].push_back(it->second);
  }
  const std::size_t nt = distinct.size();
  std::vector<char> hit(posterior.size() * nt, 0);
  parallel_for(hit.size(), threads, [&](std::size_t t) {
    hit[t] = matcher.matches(posterior[t / nt], distinct[t % nt]) ? 1 : 0;
  });

  std::vector<PriorFrequency> out;
  for (std::size_t h = 0; h < posterior.size(); ++h) {
    PriorFrequency f;
    f.hyp_id = posterior[h].hyp_id;
    f.n_windows = static_cast<int>(windows.size());
    f.mode = mode;
    std::size_t matched = 0, total = 0;
    for (const auto& [sim, texts] : windows) {
      std::size_t in_window = 0;
      for (auto t : texts) in_window += hit[h * nt + t];
      matched += mode == CountMode::binary_window ? (in_window > 0) : in_window;
      total += mode == CountMode::binary_window ? 1 : texts.size();
    }
    f.frequency = total == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(total);
    out.push_back(std::move(f));
  }
  return out;
}

std::string prior_frequency_csv(const std::vector<PriorFrequency>& rows) {
  std::string out = "hyp_id,frequency,n_windows\n";
  if (!rows.empty() && rows.front().mode != CountMode::binary_window) {
    out = "# NON-DEFAULT count mode: occurrence_rate (matching samples / all samples)\n" + out;
  }
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", r.frequency);
    out += r.hyp_id + "," + buf + "," + std::to_string(r.n_windows) + "\n";
  }
  return out;
}

}  // namespace tacit::prior
