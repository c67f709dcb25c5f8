#include "modernkit/prompt_library.hpp"

#include "modernkit/error.hpp"
#include "modernkit/resources.hpp"
#include "modernkit/util.hpp"

#include <algorithm>
#include <charconv>

namespace modernkit {

const std::string_view kExplanationInstruction =
    "Answer with the requested artifact first. After it, add a section that starts with the heading "
    "\"## Explanation\" and explains what you produced, the assumptions you made and anything a reviewer "
    "should check before using it.";

namespace {

bool is_name_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_name_char(char c) { return is_name_start(c) || (c >= '0' && c <= '9'); }

// Calls `on_token(start, end, name)` for every `{{name}}` token, where
// [start, end) covers the braces.
template <typename F>
void for_each_token(std::string_view body, F&& on_token) {
  std::size_t pos = 0;
  while ((pos = body.find("{{", pos)) != std::string_view::npos) {
    std::size_t i = pos + 2;
    if (i < body.size() && is_name_start(body[i])) {
      std::size_t j = i;
      while (j < body.size() && is_name_char(body[j])) ++j;
      if (body.substr(j, 2) == "}}") {
        on_token(pos, j + 2, body.substr(i, j - i));
        pos = j + 2;
        continue;
      }
    }
    pos += 2;
  }
}

bool is_blank(std::string_view line) { return util::trim(line).empty(); }

bool is_fence(std::string_view line) {
  const auto t = util::trim(line);
  return t.substr(0, 3) == "```";
}

// Largest prefix length <= budget that does not split a UTF-8 sequence.
std::size_t utf8_cut(std::string_view s, std::size_t budget) {
  if (s.size() <= budget) return s.size();
  std::size_t cut = budget;
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  return cut == 0 ? budget : cut;
}

void pack(std::vector<std::string>& out, std::string& current, std::string_view piece, std::string_view sep,
          std::size_t budget) {
  if (current.empty()) {
    current.assign(piece);
  } else if (current.size() + sep.size() + piece.size() <= budget) {
    current += sep;
    current += piece;
  } else {
    out.push_back(std::move(current));
    current.assign(piece);
  }
}

void split_oversized(std::vector<std::string>& out, std::string_view block, std::size_t budget) {
  std::string current;
  for (const auto& line : util::split_lines(block)) {
    std::string_view rest = line;
    while (rest.size() > budget) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
      const auto cut = utf8_cut(rest, budget);
      out.emplace_back(rest.substr(0, cut));
      rest.remove_prefix(cut);
    }
    pack(out, current, rest, "\n", budget);
  }
  if (!current.empty()) out.push_back(std::move(current));
}

}  // namespace

std::vector<std::string> placeholders_in(std::string_view body) {
  std::vector<std::string> names;
  for_each_token(body, [&](std::size_t, std::size_t, std::string_view name) {
    if (std::find(names.begin(), names.end(), name) == names.end()) names.emplace_back(name);
  });
  return names;
}

std::vector<std::string> split_into_chunks(std::string_view text, std::size_t budget) {
  if (budget == 0) throw Error(ErrorCode::InvalidArgument, "chunk budget must be positive");
  if (text.size() <= budget) return {std::string(text)};

  // Top-level paragraphs: blank lines inside ``` fences do not split.
  std::vector<std::string> blocks;
  std::vector<std::string> lines;
  bool in_fence = false;
  for (const auto& line : util::split_lines(text)) {
    if (is_fence(line)) in_fence = !in_fence;
    if (!in_fence && is_blank(line)) {
      if (!lines.empty()) blocks.push_back(util::join(lines, "\n"));
      lines.clear();
      continue;
    }
    lines.push_back(line);
  }
  if (!lines.empty()) blocks.push_back(util::join(lines, "\n"));

  std::vector<std::string> chunks;
  std::string current;
  for (const auto& block : blocks) {
    if (block.size() > budget) {
      if (!current.empty()) chunks.push_back(std::move(current));
      current.clear();
      split_oversized(chunks, block, budget);
      continue;
    }
    pack(chunks, current, block, "\n\n", budget);
  }
  if (!current.empty()) chunks.push_back(std::move(current));
  return chunks;
}

PromptTemplate PromptTemplate::parse(std::string_view text, std::string_view origin) {
  const auto fail = [&](const std::string& why) -> Error {
    return Error(ErrorCode::InvalidTemplate, std::string(origin) + ": " + why, {{"origin", std::string(origin)}});
  };

  PromptTemplate tmpl;
  bool have_placeholders = false;
  bool have_separator = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    if (line == "---") {
      have_separator = true;
      break;
    }
    if (is_blank(line)) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) throw fail("malformed metadata line '" + std::string(line) + "'");
    const auto key = util::trim(line.substr(0, colon));
    const auto value = util::trim(line.substr(colon + 1));
    if (key == "id") {
      tmpl.template_id = std::string(value);
    } else if (key == "placeholders") {
      have_placeholders = true;
      std::size_t p = 0;
      while (p <= value.size()) {
        auto comma = value.find(',', p);
        if (comma == std::string_view::npos) comma = value.size();
        const auto name = util::trim(value.substr(p, comma - p));
        if (!name.empty()) tmpl.required_placeholders.emplace(name);
        p = comma + 1;
      }
    } else if (key == "max_context_chars") {
      std::size_t n = 0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
      if (ec != std::errc{} || ptr != value.data() + value.size() || n == 0) {
        throw fail("max_context_chars must be a positive integer");
      }
      tmpl.max_context_chars = n;
    } else {
      throw fail("unknown metadata key '" + std::string(key) + "'");
    }
  }
  if (!have_separator) throw fail("missing '---' line after metadata");
  if (tmpl.template_id.empty()) throw fail("missing id");
  if (!have_placeholders || tmpl.required_placeholders.empty()) throw fail("missing placeholders");

  std::string_view body = pos < text.size() ? text.substr(pos) : std::string_view{};
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r' || body.back() == ' ')) body.remove_suffix(1);
  tmpl.body = std::string(body);

  const auto used = placeholders_in(tmpl.body);
  const std::set<std::string> used_set(used.begin(), used.end());
  if (used_set != tmpl.required_placeholders) {
    throw fail("placeholders listed in metadata do not match the body");
  }
  return tmpl;
}

const std::vector<std::string>& PromptLibrary::required_ids() {
  static const std::vector<std::string> ids = {
      "api_code",        "consolidate_requirements", "data_model_sql", "layer_requirements",
      "orm_objects",     "per_file_requirements",    "repair_syntax",  "reverse_requirements",
      "test_cases",      "ui_code",
  };
  return ids;
}

PromptLibrary PromptLibrary::embedded() {
  PromptLibrary lib;
  for (const auto& id : required_ids()) {
    const auto name = id + ".prompt";
    const auto data = resources::find(name);
    if (!data) throw Error(ErrorCode::InvalidTemplate, "embedded template missing: " + name);
    auto tmpl = PromptTemplate::parse(*data, name);
    if (tmpl.template_id != id) throw Error(ErrorCode::InvalidTemplate, name + ": id mismatch");
    lib.add(std::move(tmpl));
  }
  return lib;
}

PromptLibrary PromptLibrary::with_overrides(const std::filesystem::path& dir) {
  auto lib = embedded();
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) return lib;

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".prompt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    auto tmpl = PromptTemplate::parse(util::read_file(path), path.string());
    const auto& ids = required_ids();
    if (std::find(ids.begin(), ids.end(), tmpl.template_id) == ids.end()) {
      throw Error(ErrorCode::InvalidTemplate, path.string() + ": unknown template id '" + tmpl.template_id + "'");
    }
    if (path.stem().string() != tmpl.template_id) {
      throw Error(ErrorCode::InvalidTemplate, path.string() + ": file name does not match id");
    }
    lib.add(std::move(tmpl));
  }
  return lib;
}

void PromptLibrary::add(PromptTemplate tmpl) {
  auto id = tmpl.template_id;
  templates_.insert_or_assign(std::move(id), std::move(tmpl));
}

const PromptTemplate& PromptLibrary::get(std::string_view template_id) const {
  const auto it = templates_.find(template_id);
  if (it == templates_.end()) {
    throw Error(ErrorCode::UnknownTemplate, "unknown template '" + std::string(template_id) + "'",
                {{"template_id", std::string(template_id)}});
  }
  return it->second;
}

std::vector<PromptTemplate> PromptLibrary::list_templates() const {
  std::vector<PromptTemplate> out;
  for (const auto& [id, tmpl] : templates_) out.push_back(tmpl);
  return out;
}

void PromptLibrary::set_max_context_chars(std::size_t max_chars) {
  if (max_chars == 0) return;
  for (auto& [id, tmpl] : templates_) tmpl.max_context_chars = max_chars;
}

namespace {

std::string substitute(std::string_view body, const PromptContext& values) {
  std::string out;
  out.reserve(body.size());
  std::size_t last = 0;
  for_each_token(body, [&](std::size_t start, std::size_t end, std::string_view name) {
    const auto it = values.find(std::string(name));
    if (it == values.end()) return;
    out.append(body.substr(last, start - last));
    out += it->second;
    last = end;
  });
  out.append(body.substr(last));
  return out;
}

}  // namespace

RenderedPrompt PromptLibrary::render(std::string_view template_id, const PromptContext& context) const {
  const auto& tmpl = get(template_id);
  const auto order = placeholders_in(tmpl.body);

  PromptContext values;
  std::size_t total = 0;
  for (const auto& name : order) {
    const auto it = context.find(name);
    if (it == context.end()) {
      throw Error(ErrorCode::MissingPlaceholder, "missing context value '" + name + "' for template " + tmpl.template_id,
                  {{"placeholder", name}, {"template_id", tmpl.template_id}});
    }
    if (util::trim(it->second).empty()) {
      throw Error(ErrorCode::EmptyContextValue, "empty context value '" + name + "' for template " + tmpl.template_id,
                  {{"placeholder", name}, {"template_id", tmpl.template_id}});
    }
    values.emplace(name, it->second);
    total += it->second.size();
  }

  RenderedPrompt out;
  out.template_id = tmpl.template_id;

  const auto finish = [&](std::string text) {
    text += "\n\n";
    text += kExplanationInstruction;
    return text;
  };

  if (total <= tmpl.max_context_chars) {
    out.parts.push_back(finish(substitute(tmpl.body, values)));
    out.context_chars = total;
  } else {
    // Chunk the largest value; the rest travel with every part.
    std::string largest = order.front();
    for (const auto& name : order) {
      if (values[name].size() > values[largest].size()) largest = name;
    }
    const std::size_t fixed = total - values[largest].size();
    if (fixed >= tmpl.max_context_chars) {
      throw Error(ErrorCode::ContextTooLarge,
                  "context for template " + tmpl.template_id + " exceeds max_context_chars even without '" + largest +
                      "'",
                  {{"template_id", tmpl.template_id}, {"max_context_chars", tmpl.max_context_chars}});
    }
    const auto chunks = split_into_chunks(values[largest], tmpl.max_context_chars - fixed);
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      auto part_values = values;
      part_values[largest] = chunks[i];
      auto text = substitute(tmpl.body, part_values);
      text += "\n\n[Input part " + std::to_string(i + 1) + " of " + std::to_string(chunks.size()) + " for " +
              largest + ". Work only from this part; the answers for all parts are joined in order.]";
      out.parts.push_back(finish(std::move(text)));
      out.context_chars = std::max(out.context_chars, fixed + chunks[i].size());
    }
    out.truncated = chunks.size() > 1;
  }
  out.text = out.parts.front();
  return out;
}

}  // namespace modernkit
