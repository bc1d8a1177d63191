#include "tacit/prompts.hpp"

#include <algorithm>
#include <array>

#include "tacit/prompt_data.hpp"
#include "tacit/util.hpp"

namespace tacit::judge {

std::string_view to_string(TemplateId id) {
  switch (id) {
    case TemplateId::evaluate: return "evaluate";
    case TemplateId::search: return "search";
    case TemplateId::prior: return "prior";
    case TemplateId::match: return "match";
    case TemplateId::annotate: return "annotate";
  }
  return "unknown";
}

TemplateId template_id_from_string(std::string_view name) {
  for (auto id : {TemplateId::evaluate, TemplateId::search, TemplateId::prior, TemplateId::match,
                  TemplateId::annotate}) {
    if (to_string(id) == name) return id;
  }
  throw ValidationError("unknown template id '" + std::string(name) + "'");
}

const std::set<std::string>& known_placeholders() {
  static const std::set<std::string> names = {
      "hypothesis", "content1",      "content2",      "df",
      "df_hypothesis", "hypothesis_list", "feedback_text", "prior_hypothesis"};
  return names;
}

namespace {

bool is_name_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

// Calls on_text for literal runs and on_placeholder for each known `{name}` token.
template <typename Text, typename Placeholder>
void scan(std::string_view body, Text on_text, Placeholder on_placeholder) {
  const auto& known = known_placeholders();
  std::size_t pos = 0;
  std::size_t literal_start = 0;
  while (pos < body.size()) {
    if (body[pos] == '{') {
      std::size_t end = pos + 1;
      while (end < body.size() && is_name_char(body[end])) ++end;
      if (end < body.size() && body[end] == '}' && end > pos + 1) {
        std::string name(body.substr(pos + 1, end - pos - 1));
        if (known.count(name)) {
          on_text(body.substr(literal_start, pos - literal_start));
          on_placeholder(name);
          pos = end + 1;
          literal_start = pos;
          continue;
        }
      }
    }
    ++pos;
  }
  on_text(body.substr(literal_start));
}

}  // namespace

std::vector<std::string> PromptTemplate::placeholders() const {
  std::vector<std::string> out;
  scan(
      body, [](std::string_view) {},
      [&](const std::string& name) {
        if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
      });
  return out;
}

const PromptTemplate& builtin_template(TemplateId id) {
  static const std::array<PromptTemplate, 5> templates = {
      PromptTemplate{TemplateId::evaluate, std::string(prompt_data::k_evaluate)},
      PromptTemplate{TemplateId::search, std::string(prompt_data::k_search)},
      PromptTemplate{TemplateId::prior, std::string(prompt_data::k_prior)},
      PromptTemplate{TemplateId::match, std::string(prompt_data::k_match)},
      PromptTemplate{TemplateId::annotate, std::string(prompt_data::k_annotate)},
  };
  return templates[static_cast<std::size_t>(id)];
}

PromptTemplate load_template(TemplateId id, const std::filesystem::path& path) {
  std::string body = read_file(path);
  if (!body.empty() && body.back() == '\n') body.pop_back();
  return {id, std::move(body)};
}

std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& bindings) {
  std::vector<std::string> missing;
  for (const auto& name : tmpl.placeholders()) {
    if (!bindings.count(name)) missing.push_back(name);
  }
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw ValidationError("template '" + std::string(to_string(tmpl.id)) +
                          "' missing binding for placeholder(s): " + names);
  }
  std::string out;
  out.reserve(tmpl.body.size() + 256);
  scan(
      tmpl.body, [&](std::string_view text) { out.append(text); },
      [&](const std::string& name) { out.append(bindings.at(name)); });
  return out;
}

std::string with_nonce(std::string prompt, long long nonce) {
  prompt += "\n\n<!-- nonce:" + std::to_string(nonce) + " -->";
  return prompt;
}

std::string with_retry_marker(std::string prompt, int attempt) {
  prompt += "\n<!-- retry:" + std::to_string(attempt) + " -->";
  return prompt;
}

}  // namespace tacit::judge
