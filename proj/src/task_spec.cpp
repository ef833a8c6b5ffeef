#include "lo3d/task_spec.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "lo3d/errors.hpp"

namespace lo3d {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool label_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

// Tokens are whitespace separated words, with every comma split out as its
// own token so "a, b" and "a,b" read the same.
std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (c == ',') {
      flush();
      out.emplace_back(",");
    } else {
      cur += c;
    }
  }
  flush();
  return out;
}

bool is_keyword(const std::string& tok) {
  const std::string t = lower(tok);
  return t == "use" || t == "on" || t == "avoid";
}

class Parser {
 public:
  explicit Parser(std::vector<std::string> toks) : toks_(std::move(toks)) {}

  void keyword(const char* kw) {
    if (pos_ >= toks_.size()) throw ParseError("<end>", std::string("expected '") + kw + "'");
    if (lower(toks_[pos_]) != kw) throw ParseError(toks_[pos_], std::string("expected '") + kw + "'");
    ++pos_;
  }

  std::string name(const char* what) {
    if (pos_ >= toks_.size()) throw ParseError("<end>", std::string("expected ") + what);
    const std::string& tok = toks_[pos_];
    if (tok == "," || is_keyword(tok)) throw ParseError(tok, std::string("expected ") + what);
    if (!std::all_of(tok.begin(), tok.end(), label_char)) throw ParseError(tok, std::string("invalid ") + what);
    ++pos_;
    return lower(tok);
  }

  std::vector<std::string> label_list() {
    std::vector<std::string> out{name("a label")};
    while (pos_ < toks_.size() && toks_[pos_] == ",") {
      ++pos_;
      out.push_back(name("a label after ','"));
    }
    return out;
  }

  bool at(const char* kw) const { return pos_ < toks_.size() && lower(toks_[pos_]) == kw; }
  bool done() const { return pos_ >= toks_.size(); }
  const std::string& current() const { return toks_[pos_]; }

 private:
  std::vector<std::string> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

TaskSpec parse_task_spec(const std::string& text) {
  const auto toks = tokenize(text);
  if (toks.empty()) throw ParseError("<end>", "empty task specification");
  Parser p(toks);
  TaskSpec spec;
  p.keyword("use");
  spec.policy_name = p.name("a policy name");
  p.keyword("on");
  spec.target_labels = p.label_list();
  if (p.at("avoid")) {
    p.keyword("avoid");
    spec.obstacle_labels = p.label_list();
  }
  if (!p.done()) throw ParseError(p.current(), "unexpected trailing token");

  for (const auto& t : spec.target_labels)
    if (std::find(spec.obstacle_labels.begin(), spec.obstacle_labels.end(), t) != spec.obstacle_labels.end())
      throw ConfigError("label '" + t + "' is both a target and an obstacle");
  return spec;
}

std::string format_task_spec(const TaskSpec& spec) {
  std::ostringstream os;
  os << "use " << spec.policy_name << " on ";
  for (std::size_t i = 0; i < spec.target_labels.size(); ++i) os << (i ? "," : "") << spec.target_labels[i];
  if (!spec.obstacle_labels.empty()) {
    os << " avoid ";
    for (std::size_t i = 0; i < spec.obstacle_labels.size(); ++i) os << (i ? "," : "") << spec.obstacle_labels[i];
  }
  return os.str();
}

}  // namespace lo3d
