#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace modernkit {

inline constexpr std::size_t kDefaultMaxContextChars = 24000;

/// A prompt with `{{name}}` slots. Parsed from a `.prompt` file:
///
///     id: data_model_sql
///     placeholders: requirements
///     max_context_chars: 24000
///     ---
///     <body>
struct PromptTemplate {
  std::string template_id;
  std::string body;
  std::set<std::string> required_placeholders;
  std::size_t max_context_chars = kDefaultMaxContextChars;

  static PromptTemplate parse(std::string_view text, std::string_view origin = "<memory>");
};

/// Placeholder names appearing in a template body, in order of first use.
std::vector<std::string> placeholders_in(std::string_view body);

using PromptContext = std::map<std::string, std::string>;

struct RenderedPrompt {
  std::string template_id;
  std::string text;                // == parts.front()
  std::vector<std::string> parts;  // more than one when the context was chunked
  std::size_t context_chars = 0;   // largest amount of context carried by any part
  bool truncated = false;          // true when the render was split into parts
};

/// Splits `text` into pieces no longer than `budget` bytes, cutting only at
/// blank lines that are outside ``` fences. Paragraphs longer than the
/// budget fall back to line and then byte boundaries (never inside a UTF-8
/// sequence).
std::vector<std::string> split_into_chunks(std::string_view text, std::size_t budget);

class PromptLibrary {
 public:
  /// Templates compiled into the binary.
  static PromptLibrary embedded();

  /// Embedded templates, with any `<id>.prompt` in `dir` replacing the
  /// built-in of the same id.
  static PromptLibrary with_overrides(const std::filesystem::path& dir);

  static const std::vector<std::string>& required_ids();

  void add(PromptTemplate tmpl);  // replaces an existing id
  const PromptTemplate& get(std::string_view template_id) const;
  std::vector<PromptTemplate> list_templates() const;  // sorted by id

  /// Applies one bound to every template; 0 keeps each template's own.
  void set_max_context_chars(std::size_t max_chars);

  RenderedPrompt render(std::string_view template_id, const PromptContext& context) const;

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

/// Appended to every rendered prompt so each artifact comes back with an
/// explanation section the gateway can split off.
extern const std::string_view kExplanationInstruction;

}  // namespace modernkit
