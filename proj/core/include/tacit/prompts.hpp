#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace tacit::judge {

enum class TemplateId { evaluate, search, prior, match, annotate };

std::string_view to_string(TemplateId id);
TemplateId template_id_from_string(std::string_view name);

// Placeholder names any template may use. Only `{name}` tokens whose name is in this set are
// substitution sites; other braces (e.g. the literal JSON in the annotation prompt) are text.
const std::set<std::string>& known_placeholders();

struct PromptTemplate {
  TemplateId id = TemplateId::evaluate;
  std::string body;

  // Placeholder names occurring in body, in first-occurrence order.
  std::vector<std::string> placeholders() const;
};

// The shipped template for an id (compiled in from data/prompts/<id>.txt).
const PromptTemplate& builtin_template(TemplateId id);

// Loads a template body from a plain-text file (one trailing newline dropped).
PromptTemplate load_template(TemplateId id, const std::filesystem::path& path);

// Single-pass literal substitution. Bound text is never rescanned, so a binding containing
// "{label}" is emitted verbatim. Throws ValidationError naming any placeholder without a binding.
std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& bindings);

// Appends the invisible request nonce used to make otherwise-identical requests distinct.
std::string with_nonce(std::string prompt, long long nonce);
std::string with_retry_marker(std::string prompt, int attempt);

}  // namespace tacit::judge
