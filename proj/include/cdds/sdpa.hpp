#pragma once

/// \file cdds/sdpa.hpp
/// \brief Sparse SDPA (.dat-s) export of an LmiProblem and a parser for the
/// same subset of the format.
///
/// A constraint LHS(x) = C0 + sum_i x_i A_i is written as the SDPA block
/// sum_i x_i F_i - F0 >= 0:
///   negdef (LHS < 0):  F_i = -A_i, F0 = C0
///   posdef (LHS > 0):  F_i =  A_i, F0 = -C0
/// The objective vector is zero; external tools add their own margin.

#include "cdds/blockmat.hpp"
#include "cdds/lmi.hpp"
#include "cdds/solver.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace cdds {

struct SdpaData {
    Index mdim = 0;
    std::vector<Index> block_sizes;
    Vec objective;
    /// f[matno][block], matno 0 is F0. Dense symmetric blocks.
    std::vector<std::vector<Mat>> f;
};

namespace detail {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct SdpaLine {
    Index matno;
    Index blkno;
    Index i;
    Index j;
    double value;
    bool operator<(const SdpaLine& o) const {
        return std::tie(matno, blkno, i, j) < std::tie(o.matno, o.blkno, o.i, o.j);
    }
};

inline void push_upper(std::vector<SdpaLine>& out, Index matno, Index blkno, const Mat& a) {
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = i; j < a.cols(); ++j) {
            if (a(i, j) != 0.0) out.push_back({matno, blkno, i + 1, j + 1, a(i, j)});
        }
    }
}

}  // namespace detail

/// SDPA data equivalent to the problem's constraints (before any margin).
inline SdpaData to_sdpa(const LmiProblem& problem) {
    check_problem(problem);
    SdpaData d;
    d.mdim = problem.layout.size();
    d.objective = Vec::Zero(d.mdim);
    d.f.assign(static_cast<std::size_t>(d.mdim + 1), {});
    for (const auto& c : problem.constraints) {
        if (c.size() == 0) throw std::invalid_argument("export: constraint " + c.name + " is empty");
        const double sign = c.sense == Sense::negdef ? -1.0 : 1.0;
        d.block_sizes.push_back(c.size());
        d.f[0].push_back(-sign * c.constant.mat());
        for (Index i = 1; i <= d.mdim; ++i) d.f[static_cast<std::size_t>(i)].push_back(Mat::Zero(c.size(), c.size()));
        for (const auto& t : c.terms) d.f[static_cast<std::size_t>(t.var + 1)].back() += sign * t.coeff.mat();
    }
    return d;
}

inline std::string export_sdpa(const LmiProblem& problem) {
    const SdpaData d = to_sdpa(problem);
    std::ostringstream os;
    os << "* cdds theorem " << problem.theorem << " model " << std::hex << problem.model_hash << std::dec
       << " constraints";
    for (const auto& c : problem.constraints) os << ' ' << c.name << '(' << to_string(c.sense) << ')';
    os << '\n' << d.mdim << '\n' << d.block_sizes.size() << '\n';
    for (std::size_t k = 0; k < d.block_sizes.size(); ++k) os << (k ? " " : "") << d.block_sizes[k];
    os << '\n';
    for (Index i = 0; i < d.mdim; ++i) os << (i ? " " : "") << "0";
    os << '\n';

    std::vector<detail::SdpaLine> lines;
    for (std::size_t mat = 0; mat < d.f.size(); ++mat) {
        for (std::size_t blk = 0; blk < d.f[mat].size(); ++blk) {
            detail::push_upper(lines, static_cast<Index>(mat), static_cast<Index>(blk + 1), d.f[mat][blk]);
        }
    }
    std::sort(lines.begin(), lines.end());
    for (const auto& l : lines) {
        os << l.matno << ' ' << l.blkno << ' ' << l.i << ' ' << l.j << ' ' << detail::fmt17(l.value) << '\n';
    }
    return os.str();
}

/// Parses the sparse format: leading '*' or '"' comment lines, then mDIM,
/// nBLOCK, block sizes, objective and coefficient lines. Separators ",(){}"
/// are treated as whitespace as in the reference SDPA reader. Negative
/// (diagonal) block sizes are accepted and stored as square blocks.
inline SdpaData parse_sdpa(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::string body;
    bool header = true;
    while (std::getline(in, line)) {
        if (header && (line.empty() || line[0] == '*' || line[0] == '"')) continue;
        header = false;
        for (char& ch : line) {
            if (ch == ',' || ch == '(' || ch == ')' || ch == '{' || ch == '}') ch = ' ';
        }
        body += line;
        body += '\n';
    }
    std::istringstream tok(body);
    SdpaData d;
    long long nblock = 0;
    if (!(tok >> d.mdim) || d.mdim < 0) throw std::runtime_error("sdpa: bad mDIM");
    if (!(tok >> nblock) || nblock < 1) throw std::runtime_error("sdpa: bad nBLOCK");
    for (long long k = 0; k < nblock; ++k) {
        long long s = 0;
        if (!(tok >> s) || s == 0) throw std::runtime_error("sdpa: bad block size");
        d.block_sizes.push_back(static_cast<Index>(s < 0 ? -s : s));
    }
    d.objective = Vec::Zero(d.mdim);
    for (Index i = 0; i < d.mdim; ++i) {
        if (!(tok >> d.objective(i))) throw std::runtime_error("sdpa: truncated objective");
    }
    d.f.assign(static_cast<std::size_t>(d.mdim + 1), {});
    for (auto& per_mat : d.f) {
        for (Index s : d.block_sizes) per_mat.push_back(Mat::Zero(s, s));
    }
    long long matno = 0;
    long long blkno = 0;
    long long i = 0;
    long long j = 0;
    double v = 0.0;
    while (tok >> matno) {
        if (!(tok >> blkno >> i >> j >> v)) throw std::runtime_error("sdpa: truncated coefficient line");
        if (matno < 0 || matno > d.mdim || blkno < 1 || blkno > nblock) {
            throw std::runtime_error("sdpa: coefficient index out of range");
        }
        Mat& blk = d.f[static_cast<std::size_t>(matno)][static_cast<std::size_t>(blkno - 1)];
        if (i < 1 || j < 1 || i > blk.rows() || j > blk.rows()) throw std::runtime_error("sdpa: entry out of range");
        blk(i - 1, j - 1) = v;
        blk(j - 1, i - 1) = v;
    }
    return d;
}

}  // namespace cdds
