#include "doe/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "doe/error.hpp"

namespace doe::io {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Calls fn(line_number, fields) for each non-blank, non-comment line.
template <class Fn>
void for_each_record(const std::filesystem::path& path, Fn fn) {
  const std::string text = read_file(path);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::vector<std::string> fields;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos || line.front() == '#') continue;
    fields.clear();
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.emplace_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    fn(line_no, fields);
  }
}

bool parse_double(std::string_view text, double& out) {
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

void expect_fields(const std::filesystem::path& path, std::size_t line, const std::vector<std::string>& fields,
                   std::size_t count) {
  if (fields.size() != count) {
    throw ParseError(path.string(), line,
                     "expected " + std::to_string(count) + " tab-separated fields, got " + std::to_string(fields.size()));
  }
  for (const auto& f : fields) {
    if (f.empty()) throw ParseError(path.string(), line, "empty field");
  }
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<NamedEdge> load_edges(const std::filesystem::path& path) {
  std::vector<NamedEdge> edges;
  for_each_record(path, [&](std::size_t line, const std::vector<std::string>& f) {
    expect_fields(path, line, f, 2);
    edges.emplace_back(f[0], f[1]);
  });
  if (edges.empty()) throw DataError("'" + path.string() + "' contains no edges");
  return edges;
}

std::vector<NamedLabeledPair> load_labeled_pairs(const std::filesystem::path& path) {
  std::vector<NamedLabeledPair> pairs;
  for_each_record(path, [&](std::size_t line, const std::vector<std::string>& f) {
    expect_fields(path, line, f, 3);
    if (f[2] != "0" && f[2] != "1") throw ParseError(path.string(), line, "label must be 0 or 1, got '" + f[2] + "'");
    pairs.push_back({f[0], f[1], f[2] == "1"});
  });
  if (pairs.empty()) throw DataError("'" + path.string() + "' contains no pairs");
  return pairs;
}

LabeledPairSet resolve(const std::vector<NamedLabeledPair>& pairs, const HierarchyGraph& graph) {
  LabeledPairSet out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({graph.id(p.hypo), graph.id(p.hyper), p.label});
  return out;
}

std::vector<GradedRow> load_graded(const std::filesystem::path& path) {
  std::vector<GradedRow> rows;
  for_each_record(path, [&](std::size_t line, const std::vector<std::string>& f) {
    expect_fields(path, line, f, 3);
    double score = 0.0;
    if (!parse_double(f[2], score) || !std::isfinite(score)) {
      throw ParseError(path.string(), line, "score is not a finite number: '" + f[2] + "'");
    }
    rows.push_back({f[0], f[1], score});
  });
  if (rows.empty()) throw DataError("'" + path.string() + "' contains no graded pairs");
  return rows;
}

SynsetMap load_synset_map(const std::filesystem::path& path) {
  SynsetMap map;
  for_each_record(path, [&](std::size_t line, const std::vector<std::string>& f) {
    expect_fields(path, line, f, 2);
    std::vector<std::string> synsets;
    std::stringstream ss(f[1]);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) throw ParseError(path.string(), line, "empty synset name");
      synsets.push_back(item);
    }
    auto& slot = map[f[0]];
    slot.insert(slot.end(), synsets.begin(), synsets.end());
  });
  return map;
}

std::vector<GradedPair> attach_synsets(const std::vector<GradedRow>& rows, const SynsetMap& map,
                                       const HierarchyGraph& graph) {
  auto lookup = [&](const std::string& word) {
    std::vector<NodeId> ids;
    auto it = map.find(word);
    if (it == map.end()) {
      std::string lower = word;
      std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
      it = map.find(lower);
    }
    if (it == map.end()) return ids;
    for (const auto& name : it->second) {
      if (auto id = graph.find(name)) ids.push_back(*id);
    }
    return ids;
  };
  std::vector<GradedPair> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({r.word_u, r.word_v, r.score, lookup(r.word_u), lookup(r.word_v)});
  return out;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<std::string>& names,
                     const EmbeddingTable& table, const CheckpointMeta& meta) {
  if (names.size() != table.size()) throw CheckpointError("checkpoint: name count does not match table rows");
  std::unordered_set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty() || n.find_first_of(" \t\r\n") != std::string::npos) {
      throw CheckpointError("checkpoint: node name '" + n + "' is empty or contains whitespace");
    }
    if (!seen.insert(n).second) throw CheckpointError("checkpoint: duplicate node name '" + n + "'");
  }
  for (NodeId i = 0; i < table.size(); ++i) {
    const auto finite = [](double x) { return std::isfinite(x); };
    if (!std::ranges::all_of(table.mean(i), finite) || !std::ranges::all_of(table.log_var(i), finite)) {
      throw CheckpointError("checkpoint: non-finite parameter for node '" + names[i] + "'");
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path.string() + "'");
  out << "DOE1 " << table.size() << ' ' << table.dim() << ' ' << meta.kind.to_string() << ' '
      << format_double(meta.gamma) << ' ' << meta.seed << '\n';
  std::string line;
  for (NodeId i = 0; i < table.size(); ++i) {
    line = names[i];
    for (double x : table.mean(i)) line += ' ' + format_double(x);
    for (double x : table.log_var(i)) line += ' ' + format_double(x);
    line += '\n';
    out << line;
  }
  if (!out) throw CheckpointError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw CheckpointError("checkpoint '" + path.string() + "' is empty");
  const auto header = split_ws(line);
  if (header.empty() || header[0].rfind("DOE", 0) != 0) throw CheckpointError("not a checkpoint file: " + path.string());
  if (header[0] != "DOE1") throw CheckpointError("unsupported checkpoint version '" + header[0] + "'");
  if (header.size() != 6) throw CheckpointError("checkpoint header must have 6 fields");

  std::size_t n = 0;
  std::size_t d = 0;
  Checkpoint cp;
  try {
    n = std::stoull(header[1]);
    d = std::stoull(header[2]);
    cp.meta.kind = DivergenceKind::parse(header[3]);
    if (!parse_double(header[4], cp.meta.gamma)) throw std::invalid_argument("gamma");
    cp.meta.seed = std::stoull(header[5]);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  if (d < 1) throw CheckpointError("checkpoint dimension must be >= 1");

  cp.table = EmbeddingTable(n, d);
  cp.names.reserve(n);
  std::unordered_set<std::string> seen;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (rows == n) throw CheckpointError("checkpoint count mismatch: more than " + std::to_string(n) + " records");
    const auto tok = split_ws(line);
    if (tok.size() != 1 + 2 * d) {
      throw CheckpointError("checkpoint record " + std::to_string(rows + 1) + " has " + std::to_string(tok.size()) +
                            " fields, expected " + std::to_string(1 + 2 * d));
    }
    if (!seen.insert(tok[0]).second) throw CheckpointError("checkpoint: duplicate node name '" + tok[0] + "'");
    cp.names.push_back(tok[0]);
    const auto id = static_cast<NodeId>(rows);
    for (std::size_t k = 0; k < 2 * d; ++k) {
      double x = 0.0;
      if (!parse_double(tok[1 + k], x) || !std::isfinite(x)) {
        throw CheckpointError("checkpoint record " + std::to_string(rows + 1) + ": non-finite or malformed value '" +
                              tok[1 + k] + "'");
      }
      (k < d ? cp.table.mean(id)[k] : cp.table.log_var(id)[k - d]) = x;
    }
    ++rows;
  }
  if (rows != n) {
    throw CheckpointError("checkpoint count mismatch: header says " + std::to_string(n) + " records, found " +
                          std::to_string(rows));
  }
  return cp;
}

std::vector<std::pair<std::string, std::string>> load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path.string(), line_no, "expected 'key = value'");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty() || value.empty()) throw ParseError(path.string(), line_no, "empty key or value");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

Split make_split(const HierarchyGraph& closed, std::size_t n_val, std::size_t n_test, std::uint64_t seed) {
  const auto& pairs = closed.closure_pairs();
  if (n_val + n_test >= pairs.size()) throw DataError("split: not enough closure pairs to hold out");
  Rng rng(seed);
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::size_t> remaining(closed.size(), 0);
  for (const Pair& p : pairs) {
    ++remaining[p.hypo];
    ++remaining[p.hyper];
  }
  std::vector<bool> held(pairs.size(), false);
  std::vector<Pair> held_pairs;
  for (std::size_t idx : order) {
    if (held_pairs.size() == n_val + n_test) break;
    const Pair p = pairs[idx];
    if (remaining[p.hypo] < 2 || remaining[p.hyper] < 2) continue;
    --remaining[p.hypo];
    --remaining[p.hyper];
    held[idx] = true;
    held_pairs.push_back(p);
  }
  if (held_pairs.size() < n_val + n_test) throw DataError("split: could not hold out enough pairs");

  Split split;
  for (std::size_t i = 0; i < held_pairs.size(); ++i) {
    const Pair pos = held_pairs[i];
    const Pair neg = sample_s1(closed, pos, rng);
    auto& dst = i < n_val ? split.val : split.test;
    dst.push_back({closed.name(pos.hypo), closed.name(pos.hyper), true});
    dst.push_back({closed.name(neg.hypo), closed.name(neg.hyper), false});
  }
  split.train.reserve(pairs.size() - held_pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!held[i]) split.train.emplace_back(closed.name(pairs[i].hypo), closed.name(pairs[i].hyper));
  }
  return split;
}

void write_edges(const std::filesystem::path& path, const std::vector<NamedEdge>& edges) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (const auto& [c, p] : edges) out << c << '\t' << p << '\n';
}

void write_labeled_pairs(const std::filesystem::path& path, const std::vector<NamedLabeledPair>& pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (const auto& p : pairs) out << p.hypo << '\t' << p.hyper << '\t' << (p.label ? 1 : 0) << '\n';
}

}  // namespace doe::io
