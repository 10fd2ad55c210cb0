#include "wmixnet/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <vector>

namespace wmixnet {

namespace {

struct DyadRecord {
  double weight = 0.0;
  std::vector<double> covariates;
  std::size_t line = 0;
};

std::uint64_t dyad_key(std::size_t i, std::size_t j) { return (static_cast<std::uint64_t>(i) << 32) | j; }

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
    const std::size_t start = pos;
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t' && line[pos] != '\r') ++pos;
    if (pos > start) out.push_back(line.substr(start, pos - start));
  }
  return out;
}

double parse_real(std::string_view token, std::size_t line) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = first + token.size();
  if (!token.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw ParseError(line, "non-numeric token '" + std::string(token) + "'");
  if (!std::isfinite(value)) throw ParseError(line, "non-finite value '" + std::string(token) + "'");
  return value;
}

std::size_t parse_index(std::string_view token, std::size_t line) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(line, "non-numeric node index '" + std::string(token) + "'");
  }
  if (value < 1) throw ParseError(line, "node index must be at least 1, got " + std::string(token));
  if (value > 0xffffffffLL) throw ParseError(line, "node index too large");
  return static_cast<std::size_t>(value);
}

bool same_record(const DyadRecord& a, double w, const std::vector<double>& y) {
  return a.weight == w && a.covariates == y;
}

void write_line(std::ostream& out, std::size_t i, std::size_t j, double w, std::span<const double> y) {
  out << i + 1 << ' ' << j + 1 << ' ' << format_number(w);
  for (const double v : y) out << ' ' << format_number(v);
  out << '\n';
}

const char* connectivity_name(Family family) {
  switch (family) {
    case Family::bernoulli: return "pi";
    case Family::poisson: return "lambda";
    case Family::gaussian: return "mu";
  }
  return "theta";
}

/// Assignment-statement emitter shared by the R and Octave writers.
class ScriptWriter {
 public:
  ScriptWriter(std::ostream& out, bool r) : out_(out), r_(r) {}

  std::string field(const std::string& base, const std::string& name) const {
    return base + (r_ ? "$" : ".") + name;
  }
  std::string element(const std::string& base, std::size_t k) const {
    return r_ ? base + "[[" + std::to_string(k) + "]]" : base + "(" + std::to_string(k) + ")";
  }

  void comment(const std::string& text) { out_ << (r_ ? "# " : "% ") << text << '\n'; }
  void list(const std::string& path) {
    if (r_) out_ << path << " <- list()\n";
  }
  void scalar(const std::string& path, double x) { assign(path, format_number(x)); }
  void integer(const std::string& path, long x) { assign(path, std::to_string(x)); }
  void boolean(const std::string& path, bool b) {
    assign(path, r_ ? (b ? "TRUE" : "FALSE") : (b ? "true" : "false"));
  }
  void string(const std::string& path, const std::string& s) {
    assign(path, r_ ? "\"" + s + "\"" : "'" + s + "'");
  }
  void vector(const std::string& path, const Eigen::VectorXd& v) {
    std::string body;
    for (Eigen::Index k = 0; k < v.size(); ++k) body += (k ? ", " : "") + format_number(v(k));
    assign(path, r_ ? "c(" + body + ")" : "[" + body + "]");
  }
  void matrix(const std::string& path, const Eigen::MatrixXd& m) {
    std::string body;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (!r_ && i > 0) body += "; ";
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (j > 0 || (r_ && i > 0)) body += ", ";
        body += format_number(m(i, j));
      }
    }
    if (r_) {
      assign(path, "matrix(c(" + body + "), nrow = " + std::to_string(m.rows()) +
                       ", ncol = " + std::to_string(m.cols()) + ", byrow = TRUE)");
    } else {
      assign(path, "[" + body + "]");
    }
  }
  /// Q x Q x p array with entry (q, l, k) = block_beta[q * Q + l](k).
  void block_array(const std::string& path, const std::vector<Eigen::VectorXd>& blocks, int groups) {
    const Eigen::Index p = blocks.empty() ? 0 : blocks.front().size();
    if (r_) {
      std::string body;
      for (Eigen::Index k = 0; k < p; ++k)
        for (int l = 0; l < groups; ++l)
          for (int q = 0; q < groups; ++q) {
            if (!body.empty()) body += ", ";
            body += format_number(blocks[static_cast<std::size_t>(q * groups + l)](k));
          }
      assign(path, "array(c(" + body + "), dim = c(" + std::to_string(groups) + ", " + std::to_string(groups) +
                       ", " + std::to_string(p) + "))");
      return;
    }
    for (Eigen::Index k = 0; k < p; ++k) {
      Eigen::MatrixXd slice(groups, groups);
      for (int q = 0; q < groups; ++q)
        for (int l = 0; l < groups; ++l) slice(q, l) = blocks[static_cast<std::size_t>(q * groups + l)](k);
      matrix(path + "(:, :, " + std::to_string(k + 1) + ")", slice);
    }
  }

 private:
  void assign(const std::string& path, const std::string& value) {
    if (r_) {
      out_ << path << " <- " << value << '\n';
    } else {
      out_ << path << " = " << value << ";\n";
    }
  }

  std::ostream& out_;
  bool r_;
};

void write_script(const SweepResult& sweep, std::ostream& out, bool r) {
  ScriptWriter w(out, r);
  w.comment("wmixnet results");
  const std::string root = "wmixnet";
  w.list(root);
  const ModelSpec spec = sweep.per_q.empty() ? ModelSpec{} : sweep.per_q.begin()->second.spec;
  w.string(w.field(root, "model"), spec.name());
  w.integer(w.field(root, "selected_Q"), sweep.selected_q);
  const std::string results = w.field(root, "results");
  w.list(results);
  std::size_t k = 0;
  for (const auto& [q, fit] : sweep.per_q) {
    const std::string base = w.element(results, ++k);
    w.list(base);
    w.integer(w.field(base, "Q"), q);
    w.vector(w.field(base, "alpha"), fit.params.alpha);
    w.matrix(w.field(base, connectivity_name(fit.spec.family)), fit.params.connectivity);
    if (fit.params.sigma2) w.scalar(w.field(base, "sigma2"), *fit.params.sigma2);
    if (fit.params.beta) w.vector(w.field(base, "beta"), *fit.params.beta);
    if (!fit.params.block_beta.empty()) w.block_array(w.field(base, "beta_ql"), fit.params.block_beta, q);
    w.matrix(w.field(base, "tau"), fit.tau.matrix());
    w.scalar(w.field(base, "pseudo_likelihood"), fit.objective);
    w.scalar(w.field(base, "ICL"), fit.icl);
    w.integer(w.field(base, "iterations"), fit.iterations);
    w.boolean(w.field(base, "converged"), fit.converged);
    w.boolean(w.field(base, "degenerate"), fit.degenerate);
  }
}

std::string row_text(const Eigen::MatrixXd& m, Eigen::Index i) {
  std::string s;
  for (Eigen::Index j = 0; j < m.cols(); ++j) s += (j ? " " : "") + format_number(m(i, j));
  return s;
}

std::string vector_text(const Eigen::VectorXd& v) {
  std::string s = "(";
  for (Eigen::Index k = 0; k < v.size(); ++k) s += (k ? ", " : "") + format_number(v(k));
  return s + ")";
}

void write_matrix_text(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) out << "  " << row_text(m, i) << '\n';
}

void write_text(const SweepResult& sweep, std::ostream& out) {
  const ModelSpec spec = sweep.per_q.empty() ? ModelSpec{} : sweep.per_q.begin()->second.spec;
  out << "model: " << spec.name() << '\n';
  out << "selected Q: " << sweep.selected_q << '\n';
  for (const auto& [q, fit] : sweep.per_q) {
    out << "\n== Q=" << q << " ==\n";
    out << "alpha: " << vector_text(fit.params.alpha) << '\n';
    out << connectivity_name(fit.spec.family) << ":\n";
    write_matrix_text(out, fit.params.connectivity);
    if (fit.params.sigma2) out << "sigma2: " << format_number(*fit.params.sigma2) << '\n';
    if (fit.params.beta) out << "beta: " << vector_text(*fit.params.beta) << '\n';
    if (!fit.params.block_beta.empty()) {
      for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b)
          out << "beta[" << a + 1 << "," << b + 1 << "]: " << vector_text(fit.params.block_coefficients(a, b))
              << '\n';
    }
    out << "tau:\n";
    write_matrix_text(out, fit.tau.matrix());
    out << "pseudo-likelihood: " << format_number(fit.objective) << '\n';
    out << "ICL: " << format_number(fit.icl) << '\n';
    out << "iterations: " << fit.iterations << '\n';
    out << "converged: " << (fit.converged ? "yes" : "no") << '\n';
    out << "degenerate: " << (fit.degenerate ? "yes" : "no") << '\n';
    out << "initialization: " << to_string(fit.init_source) << '\n';
  }
}

}  // namespace

ParseError::ParseError(std::size_t line, const std::string& message)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

Network parse_spm(std::istream& in, const SpmOptions& options) {
  std::unordered_map<std::uint64_t, DyadRecord> dyads;
  std::vector<std::uint64_t> order;
  std::optional<std::size_t> arity;
  std::size_t max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty() || fields.front().front() == '#') continue;
    if (fields.size() < 3) throw ParseError(line_no, "expected at least 3 columns, got " + std::to_string(fields.size()));
    const std::size_t i = parse_index(fields[0], line_no);
    const std::size_t j = parse_index(fields[1], line_no);
    if (i == j) throw ParseError(line_no, "self-loop on node " + std::to_string(i));
    const double w = parse_real(fields[2], line_no);
    std::vector<double> y;
    for (std::size_t k = 3; k < fields.size(); ++k) y.push_back(parse_real(fields[k], line_no));
    if (!arity) {
      arity = y.size();
    } else if (*arity != y.size()) {
      throw ParseError(line_no, "expected " + std::to_string(*arity) + " covariates, got " + std::to_string(y.size()));
    }
    max_index = std::max({max_index, i, j});
    const std::size_t a = options.symmetric ? std::min(i, j) : i;
    const std::size_t b = options.symmetric ? std::max(i, j) : j;
    const auto key = dyad_key(a - 1, b - 1);
    const auto found = dyads.find(key);
    if (found != dyads.end()) {
      if (!same_record(found->second, w, y)) {
        throw ParseError(line_no, "dyad (" + std::to_string(i) + "," + std::to_string(j) +
                                      ") contradicts line " + std::to_string(found->second.line));
      }
      continue;
    }
    dyads.emplace(key, DyadRecord{w, std::move(y), line_no});
    order.push_back(key);
  }
  if (in.bad()) throw ParseError(0, "read failure");

  std::size_t n = max_index;
  if (options.n_override) {
    if (*options.n_override < max_index) {
      throw ParseError(0, "n override " + std::to_string(*options.n_override) + " is below the largest index " +
                              std::to_string(max_index));
    }
    n = *options.n_override;
  }
  if (n == 0) throw ParseError(0, "no edges and no node count");
  const std::size_t p = arity.value_or(0);

  if (p > 0) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = options.symmetric ? i + 1 : 0; j < n; ++j) {
        if (i == j) continue;
        if (!dyads.contains(dyad_key(i, j))) {
          throw ParseError(0, "covariates are used but dyad (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                  ") is missing");
        }
      }
    }
  }

  NetworkBuilder builder(n, !options.symmetric, p);
  for (const auto key : order) {
    auto& rec = dyads.at(key);
    const std::size_t i = key >> 32;
    const std::size_t j = key & 0xffffffffu;
    if (rec.weight != 0.0) builder.set_weight(i, j, rec.weight);
    if (p > 0) builder.set_covariates(i, j, std::move(rec.covariates));
  }
  return builder.build();
}

Network parse_spm_text(std::string_view text, const SpmOptions& options) {
  std::istringstream in{std::string(text)};
  return parse_spm(in, options);
}

void write_spm(const Network& network, std::ostream& out) {
  const std::size_t n = network.size();
  std::size_t max_index = 0;
  if (network.has_covariates()) {
    network.for_each_dyad([&](std::size_t i, std::size_t j) {
      write_line(out, i, j, network.weight(i, j), network.covariate(i, j));
    });
    max_index = n;
  } else {
    const auto& w = network.weights();
    for (Eigen::Index i = 0; i < w.outerSize(); ++i) {
      for (SparseWeights::InnerIterator it(w, i); it; ++it) {
        const auto row = static_cast<std::size_t>(it.row());
        const auto col = static_cast<std::size_t>(it.col());
        if (!network.directed() && col < row) continue;
        write_line(out, row, col, it.value(), {});
        max_index = std::max({max_index, row + 1, col + 1});
      }
    }
  }
  if (max_index < n && n >= 2) write_line(out, 0, n - 1, 0.0, {});
  if (!out) throw std::runtime_error("failed to write network");
}

std::string format_number(double x) {
  if (std::isnan(x)) return "NaN";
  if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

OutputFormat parse_output_format(std::string_view name) {
  if (name == "text") return OutputFormat::text;
  if (name == "R") return OutputFormat::r;
  if (name == "matlab" || name == "octave") return OutputFormat::octave;
  throw std::invalid_argument("unknown output format: " + std::string(name));
}

void write_output(const SweepResult& sweep, OutputFormat format, std::ostream& out) {
  switch (format) {
    case OutputFormat::text: write_text(sweep, out); break;
    case OutputFormat::r: write_script(sweep, out, true); break;
    case OutputFormat::octave: write_script(sweep, out, false); break;
  }
  out.flush();
  if (!out) throw std::runtime_error("failed to write output");
}

}  // namespace wmixnet
