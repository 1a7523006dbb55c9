#include "fracperm/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string_view>

#include "fracperm/errors.hpp"

namespace fracperm {

MatrixFormat parse_matrix_format(const std::string& name) {
    if (name == "dense" || name == "dense-text") return MatrixFormat::dense_text;
    if (name == "sparse" || name == "sparse-triplet") return MatrixFormat::sparse_triplet;
    throw Error(ErrorCode::invalid_argument, "unknown matrix format '" + name + "'");
}

namespace {

// Accepts the unicode minus as well, since hand-edited files sometimes carry it.
std::string normalize_minus(std::string tok) {
    const std::string_view uminus = "\xE2\x88\x92";
    for (auto pos = tok.find(uminus); pos != std::string::npos; pos = tok.find(uminus))
        tok.replace(pos, uminus.size(), "-");
    return tok;
}

double parse_double(const std::string& raw, int line) {
    const std::string tok = normalize_minus(raw);
    try {
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::parse, "line " + std::to_string(line) + ": bad number '" + raw + "'");
    }
}

int parse_index(const std::string& raw, int line) {
    const std::string tok = normalize_minus(raw);
    int v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw Error(ErrorCode::parse, "line " + std::to_string(line) + ": bad index '" + raw + "'");
    return v;
}

}  // namespace

WeightMatrix read_matrix(std::istream& in, MatrixFormat format) {
    std::string line;
    int lineno = 0;
    int n = -1;
    std::vector<Entry> entries;
    std::vector<double> dense;

    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::vector<std::string> toks;
        for (std::string t; ls >> t;) toks.push_back(t);
        if (toks.empty()) continue;

        if (n < 0) {
            if (toks.size() != 1) throw Error(ErrorCode::parse, "header must be a single integer n");
            n = parse_index(toks[0], lineno);
            if (n < 1) throw Error(ErrorCode::parse, "n must be >= 1");
            continue;
        }
        if (format == MatrixFormat::dense_text) {
            for (const auto& t : toks) dense.push_back(parse_double(t, lineno));
        } else {
            if (toks.size() != 3)
                throw Error(ErrorCode::parse, "line " + std::to_string(lineno) + ": expected 'i j value'");
            const int i = parse_index(toks[0], lineno);
            const int j = parse_index(toks[1], lineno);
            const double v = parse_double(toks[2], lineno);
            if (i < 0 || i >= n || j < 0 || j >= n)
                throw Error(ErrorCode::dimension_mismatch,
                            "line " + std::to_string(lineno) + ": index outside n=" + std::to_string(n));
            entries.push_back({i, j, v});
        }
    }
    if (n < 0) throw Error(ErrorCode::parse, "empty matrix file");
    if (format == MatrixFormat::dense_text) {
        if (dense.size() != static_cast<std::size_t>(n) * n)
            throw Error(ErrorCode::dimension_mismatch,
                        "expected " + std::to_string(n * n) + " values, got " + std::to_string(dense.size()));
        return WeightMatrix::from_dense(n, dense);
    }
    return WeightMatrix(n, std::move(entries));
}

WeightMatrix load_matrix(const std::string& path, MatrixFormat format) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::parse, "cannot open " + path);
    return read_matrix(in, format);
}

void write_matrix(std::ostream& out, const WeightMatrix& p, MatrixFormat format) {
    const auto old_prec = out.precision(17);
    out << p.n() << '\n';
    if (format == MatrixFormat::dense_text) {
        const auto d = p.dense();
        for (int i = 0; i < p.n(); ++i) {
            for (int j = 0; j < p.n(); ++j) out << (j ? " " : "") << d[static_cast<std::size_t>(i) * p.n() + j];
            out << '\n';
        }
    } else {
        for (const Entry& e : p.entries()) out << e.row << ' ' << e.col << ' ' << e.value << '\n';
    }
    out.precision(old_prec);
}

void save_matrix(const std::string& path, const WeightMatrix& p, MatrixFormat format) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::parse, "cannot write " + path);
    write_matrix(out, p, format);
}

}  // namespace fracperm
