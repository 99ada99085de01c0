#include "dspar/format_lang.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <sstream>

#include "dspar/errors.hpp"

namespace dspar {

FormatSpec parse_format(const std::string& text) {
  FormatSpec f;
  size_t at = 0;
  while (at < text.size() && text[at] != ':') {
    char c = text[at];
    if (c == 'd')
      f.kinds.push_back(LevelKind::Dense);
    else if (c == 's')
      f.kinds.push_back(LevelKind::Compressed);
    else if (!std::isspace(static_cast<unsigned char>(c)))
      throw ParseError("format: unknown level kind '" + std::string(1, c) +
                       "' (use d or s)");
    at++;
  }
  if (f.kinds.empty()) throw ParseError("format: no levels in '" + text + "'");
  if (at < text.size()) {
    std::istringstream order(text.substr(at + 1));
    std::string field;
    while (std::getline(order, field, ',')) {
      try {
        size_t used = 0;
        int mode = std::stoi(field, &used);
        while (used < field.size() && std::isspace(static_cast<unsigned char>(field[used])))
          used++;
        if (used != field.size()) throw std::invalid_argument("");
        f.mode_order.push_back(mode);
      } catch (const std::exception&) {
        throw ParseError("format: bad mode order entry '" + field + "'");
      }
    }
  } else {
    f.mode_order.resize(f.kinds.size());
    std::iota(f.mode_order.begin(), f.mode_order.end(), 0);
  }
  try {
    f.validate();
  } catch (const ValidationError& e) {
    throw ParseError(std::string(e.what()) + " in '" + text + "'");
  }
  return f;
}

std::string format_to_string(const FormatSpec& format) {
  std::string out;
  for (LevelKind k : format.kinds) out += (k == LevelKind::Dense ? 'd' : 's');
  bool identity = true;
  for (size_t i = 0; i < format.mode_order.size(); i++)
    identity = identity && format.mode_order[i] == static_cast<int>(i);
  if (!identity) {
    out += ':';
    for (size_t i = 0; i < format.mode_order.size(); i++) {
      if (i) out += ',';
      out += std::to_string(format.mode_order[i]);
    }
  }
  return out;
}

namespace {

struct TdnLexer {
  std::string text;
  size_t at = 0;

  void skip() {
    while (at < text.size() && std::isspace(static_cast<unsigned char>(text[at]))) at++;
  }
  bool accept(char c) {
    skip();
    if (at < text.size() && text[at] == c) {
      at++;
      return true;
    }
    return false;
  }
  bool accept_word(const std::string& w) {
    skip();
    if (text.compare(at, w.size(), w) == 0) {
      size_t end = at + w.size();
      if (end >= text.size() || !(std::isalnum(static_cast<unsigned char>(text[end])) ||
                                  text[end] == '_')) {
        at = end;
        return true;
      }
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c))
      throw ParseError(std::string("tdn: expected '") + c + "' at offset " +
                       std::to_string(at) + " in '" + text + "'");
  }
  std::string identifier() {
    skip();
    size_t start = at;
    while (at < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[at])) || text[at] == '_'))
      at++;
    if (start == at)
      throw ParseError("tdn: expected name at offset " + std::to_string(start) + " in '" +
                       text + "'");
    return text.substr(start, at - start);
  }
  bool done() {
    skip();
    return at >= text.size();
  }
};

}  // namespace

TdnStatement parse_tdn(const std::string& text) {
  TdnLexer lex{text};
  TdnStatement tdn;
  tdn.tensor = lex.identifier();
  lex.expect('(');
  if (!lex.accept(')')) {
    while (true) {
      tdn.dim_names.push_back(lex.identifier());
      if (lex.accept(')')) break;
      lex.expect(',');
    }
  }
  while (lex.accept_word("fuse")) {
    lex.expect('(');
    TdnStatement::FusionGroup group;
    while (true) {
      group.parts.push_back(lex.identifier());
      if (lex.accept(',')) continue;
      lex.expect('-');
      lex.expect('>');
      break;
    }
    group.fused = lex.identifier();
    lex.expect(')');
    if (group.parts.size() < 2)
      throw ParseError("tdn: fuse group needs at least two names in '" + text + "'");
    tdn.fusions.push_back(std::move(group));
  }
  if (!lex.accept_word("onto"))
    throw ParseError("tdn: expected 'onto' in '" + text + "'");
  lex.identifier();  // machine name, conventionally M
  lex.expect('(');
  if (!lex.accept(')')) {
    while (true) {
      TdnStatement::MachineDim dim;
      dim.nonzero = lex.accept('~');
      dim.name = lex.identifier();
      tdn.machine_dims.push_back(dim);
      if (lex.accept(')')) break;
      lex.expect(',');
    }
  }
  if (!lex.done()) throw ParseError("tdn: trailing text in '" + text + "'");
  return tdn;
}

std::string TdnStatement::to_string() const {
  std::ostringstream out;
  out << tensor << "(";
  for (size_t i = 0; i < dim_names.size(); i++) {
    if (i) out << ", ";
    out << dim_names[i];
  }
  out << ")";
  for (const auto& g : fusions) {
    out << " fuse(";
    for (size_t i = 0; i < g.parts.size(); i++) {
      if (i) out << ", ";
      out << g.parts[i];
    }
    out << " -> " << g.fused << ")";
  }
  out << " onto M(";
  for (size_t i = 0; i < machine_dims.size(); i++) {
    if (i) out << ", ";
    if (machine_dims[i].nonzero) out << "~";
    out << machine_dims[i].name;
  }
  out << ")";
  return out.str();
}

TdnStatement default_tdn(const std::string& tensor, int order) {
  TdnStatement tdn;
  tdn.tensor = tensor;
  for (int d = 0; d < order; d++) tdn.dim_names.push_back("d" + std::to_string(d));
  tdn.machine_dims.push_back({"d0", false});
  return tdn;
}

std::vector<TdnMatch> validate_tdn(const TdnStatement& tdn, const FormatSpec& format,
                                   const MachineGrid& grid) {
  if (static_cast<int>(tdn.dim_names.size()) != format.order())
    throw ValidationError("tdn: dimension count does not match tensor order for '" +
                          tdn.tensor + "'");
  for (size_t i = 0; i < tdn.dim_names.size(); i++) {
    for (size_t j = i + 1; j < tdn.dim_names.size(); j++) {
      if (tdn.dim_names[i] == tdn.dim_names[j])
        throw ValidationError("tdn: duplicate dimension name '" + tdn.dim_names[i] + "'");
    }
  }
  if (static_cast<int>(tdn.machine_dims.size()) > grid.rank())
    throw ValidationError("tdn: more machine dimensions than the grid has");
  for (size_t i = 0; i < tdn.machine_dims.size(); i++) {
    for (size_t j = i + 1; j < tdn.machine_dims.size(); j++) {
      if (tdn.machine_dims[i].name == tdn.machine_dims[j].name)
        throw ValidationError("tdn: machine-matched names must be distinct");
    }
  }

  // Storage modes covered by each name; fused names cover the concatenation
  // of their parts, which must be consecutive in storage order.
  auto storage_of_mode = [&](int logical) {
    for (int k = 0; k < format.order(); k++) {
      if (format.mode_order[k] == logical) return k;
    }
    throw ValidationError("tdn: internal mode lookup failure");
  };
  std::map<std::string, std::vector<int>> runs;
  for (size_t d = 0; d < tdn.dim_names.size(); d++)
    runs[tdn.dim_names[d]] = {storage_of_mode(static_cast<int>(d))};

  std::map<std::string, bool> consumed;
  for (const auto& g : tdn.fusions) {
    std::vector<int> run;
    for (const auto& part : g.parts) {
      auto it = runs.find(part);
      if (it == runs.end())
        throw ValidationError("tdn: fuse references unknown name '" + part + "'");
      if (consumed[part])
        throw ValidationError("tdn: name '" + part + "' appears in more than one fusion group");
      consumed[part] = true;
      run.insert(run.end(), it->second.begin(), it->second.end());
    }
    for (size_t i = 1; i < run.size(); i++) {
      if (run[i] != run[i - 1] + 1)
        throw ValidationError("tdn: fused dimensions must be consecutive in storage order");
    }
    if (runs.count(g.fused))
      throw ValidationError("tdn: fused name '" + g.fused + "' is already in use");
    runs[g.fused] = run;
    consumed[g.fused] = false;
  }

  std::vector<TdnMatch> matches;
  for (size_t m = 0; m < tdn.machine_dims.size(); m++) {
    const auto& dim = tdn.machine_dims[m];
    auto it = runs.find(dim.name);
    if (it != runs.end() && consumed[dim.name])
      throw ValidationError("tdn: name '" + dim.name + "' was collapsed by fusion");
    bool matched = it != runs.end();
    if (dim.nonzero) {
      if (!matched)
        throw ValidationError("tdn: ~ marker on '" + dim.name +
                              "', which names no tensor dimension");
      int innermost = it->second.back();
      if (format.kinds[innermost] != LevelKind::Compressed)
        throw ValidationError("tdn: non-zero partition of '" + dim.name +
                              "' needs a compressed innermost mode");
    }
    if (matched && it->second.size() > 1 && !dim.nonzero)
      throw ValidationError("tdn: fused dimension '" + dim.name +
                            "' can only take a non-zero (~) partition");
    if (!matched) continue;  // replication across this grid dimension
    TdnMatch match;
    match.name = dim.name;
    match.nonzero = dim.nonzero;
    match.grid_dim = static_cast<int>(m);
    match.storage_modes = it->second;
    matches.push_back(std::move(match));
  }
  return matches;
}

}  // namespace dspar
