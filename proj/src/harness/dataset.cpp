#include "hypercurv/harness/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "hypercurv/error.hpp"

namespace hypercurv::harness {

std::size_t Dataset::n_classes() const {
  int m = -1;
  for (int l : labels) m = std::max(m, l);
  return static_cast<std::size_t>(m + 1);
}

void Dataset::validate(bool classification) const {
  if (features.rank() != 2) throw ContractViolation("dataset features must be a matrix");
  if (features.rows() != labels.size()) throw ContractViolation("dataset has mismatched feature and label counts");
  if (labels.size() < 2) throw SizeError("dataset needs at least 2 rows");
  if (!features.all_finite()) throw DomainError("dataset features must be finite");
  for (int l : labels) {
    if (l < 0) throw ContractViolation("labels must be non-negative");
  }
  if (classification && std::set<int>(labels.begin(), labels.end()).size() < 2) {
    throw ConfigurationError("classification needs at least 2 distinct labels");
  }
}

namespace {

std::size_t checked_leaf_count(int depth, int branching) {
  if (depth < 2) throw ConfigurationError("tree depth must be at least 2");
  if (branching < 2) throw ConfigurationError("tree branching must be at least 2");
  std::size_t leaves = 1;
  for (int i = 0; i < depth; ++i) {
    leaves *= static_cast<std::size_t>(branching);
    if (leaves > kMaxTreeLeaves) throw SizeError("tree has more than 100000 leaves");
  }
  return leaves;
}

}  // namespace

Dataset gen_tree_dataset(const TreeSpec& spec) {
  const std::size_t leaves = checked_leaf_count(spec.depth, spec.branching);
  if (spec.d_in < 1) throw ConfigurationError("d_in must be positive");
  if (!(spec.noise_sigma >= 0.0)) throw ConfigurationError("noise_sigma must be non-negative");
  if (spec.samples_per_leaf < 1) throw ConfigurationError("samples_per_leaf must be positive");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> nd;
  const std::size_t d = spec.d_in;
  std::vector<std::vector<double>> level{std::vector<double>(d, 0.0)};
  for (int l = 1; l <= spec.depth; ++l) {
    std::vector<std::vector<double>> next;
    next.reserve(level.size() * static_cast<std::size_t>(spec.branching));
    const double step = std::ldexp(1.0, -l);
    for (const auto& parent : level) {
      for (int b = 0; b < spec.branching; ++b) {
        std::vector<double> u(d);
        double n = 0.0;
        while (n < 1e-12) {
          for (auto& x : u) x = nd(rng);
          n = 0.0;
          for (double x : u) n += x * x;
          n = std::sqrt(n);
        }
        std::vector<double> child = parent;
        for (std::size_t k = 0; k < d; ++k) child[k] += step * u[k] / n;
        next.push_back(std::move(child));
      }
    }
    level = std::move(next);
  }
  const std::size_t per_class = leaves / static_cast<std::size_t>(spec.branching);
  const std::size_t reps = static_cast<std::size_t>(spec.samples_per_leaf);
  Dataset out;
  out.features = Tensor(Shape{leaves * reps, d});
  out.labels.reserve(leaves * reps);
  std::size_t row = 0;
  for (std::size_t i = 0; i < leaves; ++i) {
    for (std::size_t r = 0; r < reps; ++r, ++row) {
      for (std::size_t k = 0; k < d; ++k) out.features.at(row, k) = level[i][k] + spec.noise_sigma * nd(rng);
      out.labels.push_back(static_cast<int>(i / per_class));
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "tree(depth=%d,branching=%d,sigma=%g,d_in=%zu,samples_per_leaf=%d,seed=%llu)",
                spec.depth, spec.branching, spec.noise_sigma, d, spec.samples_per_leaf,
                static_cast<unsigned long long>(spec.seed));
  out.name = "tree";
  out.provenance = buf;
  return out;
}

Tensor tree_leaf_path_distances(int depth, int branching) {
  const std::size_t n = checked_leaf_count(depth, branching);
  Tensor D(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      // leaves share the ancestor at the longest common prefix of their base-b digits
      std::size_t a = i, b = j;
      int up = 0;
      while (a != b) {
        a /= static_cast<std::size_t>(branching);
        b /= static_cast<std::size_t>(branching);
        ++up;
      }
      D.at(i, j) = 2.0 * up;
    }
  }
  return D;
}

namespace {

std::string trim(std::string s) {
  const auto ws = [](unsigned char ch) { return std::isspace(ch) != 0; };
  while (!s.empty() && ws(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && ws(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  return res.ec == std::errc() && res.ptr == last && std::isfinite(v);
}

bool parse_int(const std::string& s, long long& v) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!trim(line).empty()) {
      header = split_row(trim(line));
      break;
    }
  }
  if (header.empty()) throw ParseError(path + ": empty file, expected a header row");
  const auto it = std::find(header.begin(), header.end(), label_column);
  if (it == header.end()) throw ParseError(path + ": missing label column '" + label_column + "'");
  const std::size_t label_idx = static_cast<std::size_t>(it - header.begin());
  const std::size_t d = header.size() - 1;
  if (d == 0) throw ParseError(path + ": no feature columns");

  std::vector<double> feats;
  std::vector<std::string> raw_labels;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != header.size()) {
      throw ParseError(path + ": row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                       " fields, header has " + std::to_string(header.size()));
    }
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k == label_idx) {
        if (cells[k].empty()) throw ParseError(path + ": row " + std::to_string(line_no) + " has an empty label");
        raw_labels.push_back(cells[k]);
        continue;
      }
      double v;
      if (!parse_double(cells[k], v)) {
        throw ParseError(path + ": row " + std::to_string(line_no) + ", column '" + header[k] +
                         "': non-numeric value '" + cells[k] + "'");
      }
      feats.push_back(v);
    }
  }
  if (raw_labels.empty()) throw ParseError(path + ": no data rows");

  Dataset out;
  const std::size_t n = raw_labels.size();
  out.features = Tensor(Shape{n, d}, std::move(feats));
  bool integral = true;
  std::vector<long long> ints(n);
  for (std::size_t i = 0; i < n && integral; ++i) integral = parse_int(raw_labels[i], ints[i]) && ints[i] >= 0;
  if (integral) {
    for (long long v : ints) out.labels.push_back(static_cast<int>(v));
  } else {
    std::map<std::string, int> ids;
    for (const auto& s : raw_labels) {
      auto [pos, fresh] = ids.emplace(s, static_cast<int>(ids.size()));
      if (fresh) out.label_names.push_back(s);
      out.labels.push_back(pos->second);
    }
  }
  out.name = path.substr(path.find_last_of('/') == std::string::npos ? 0 : path.find_last_of('/') + 1);
  out.provenance = path;
  return out;
}

void save_csv(const Dataset& d, const std::string& path, const std::string& label_column) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot write " + path);
  const std::size_t dim = d.dim();
  for (std::size_t k = 0; k < dim; ++k) os << 'x' << k << ',';
  os << label_column << '\n';
  char buf[32];
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t k = 0; k < dim; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", d.features.at(i, k));
      os << buf << ',';
    }
    const int l = d.labels[i];
    if (!d.label_names.empty()) {
      os << d.label_names.at(static_cast<std::size_t>(l));
    } else {
      os << l;
    }
    os << '\n';
  }
  if (!os) throw ParseError("failed while writing " + path);
}

Split split_dataset(const Dataset& d, double train_fraction, double val_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && val_fraction > 0.0 && train_fraction + val_fraction <= 1.0 + 1e-12)) {
    throw ConfigurationError("split fractions must be positive and sum to at most 1");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < d.size(); ++i) by_class[d.labels[i]].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> tr, va, te;
  for (auto& [label, idx] : by_class) {
    for (std::size_t i = idx.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(idx[i - 1], idx[pick(rng)]);
    }
    const std::size_t m = idx.size();
    std::size_t nt = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(m)));
    std::size_t nv = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(m)));
    nt = std::min(nt, m);
    nv = std::min(nv, m - nt);
    tr.insert(tr.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(nt));
    va.insert(va.end(), idx.begin() + static_cast<std::ptrdiff_t>(nt),
              idx.begin() + static_cast<std::ptrdiff_t>(nt + nv));
    te.insert(te.end(), idx.begin() + static_cast<std::ptrdiff_t>(nt + nv), idx.end());
  }
  const auto take = [&](std::vector<std::size_t> rows, const std::string& part) {
    std::sort(rows.begin(), rows.end());
    Dataset s;
    s.name = d.name + ":" + part;
    s.provenance = d.provenance;
    s.label_names = d.label_names;
    if (rows.empty()) return s;  // leftover test part may be empty
    const Batch b = subset(d.batch(), rows);
    s.features = b.inputs;
    s.labels = b.labels;
    return s;
  };
  Split out{take(tr, "train"), take(va, "val"), take(te, "test")};
  if (out.train.size() == 0 || out.val.size() == 0) throw SizeError("split left the train or validation set empty");
  return out;
}

}  // namespace hypercurv::harness
