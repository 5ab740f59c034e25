#include "rokdeepc/trajectory.hpp"

#include <Eigen/SVD>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace rokdeepc {

SignalTrajectory::SignalTrajectory(Mat inputs_, Mat outputs_)
    : inputs(std::move(inputs_)), outputs(std::move(outputs_)) {
    if (inputs.cols() != outputs.cols())
        throw DimensionError("SignalTrajectory: inputs and outputs must have the same length");
    if (inputs.cols() < 1)
        throw DimensionError("SignalTrajectory: length must be >= 1");
    if (inputs.rows() < 1 || outputs.rows() < 1)
        throw DimensionError("SignalTrajectory: channel counts must be >= 1");
}

Mat build_hankel(const Mat& series, int depth) {
    const int q = static_cast<int>(series.rows());
    const int t = static_cast<int>(series.cols());
    if (depth < 1)
        throw DimensionError("build_hankel: depth must be >= 1");
    if (depth > t)
        throw DimensionError("build_hankel: depth " + std::to_string(depth) +
                             " exceeds series length " + std::to_string(t));
    const int cols = t - depth + 1;
    Mat h(q * depth, cols);
    for (int i = 0; i < depth; ++i)
        h.middleRows(i * q, q) = series.middleCols(i, cols);
    return h;
}

HankelPartition partition(const SignalTrajectory& traj, int t_ini, int horizon) {
    if (t_ini < 1 || horizon < 1)
        throw DimensionError("partition: t_ini and horizon must be >= 1");
    const int depth = t_ini + horizon;
    if (depth > traj.length())
        throw DimensionError("partition: t_ini + horizon = " + std::to_string(depth) +
                             " exceeds trajectory length " + std::to_string(traj.length()));
    const Mat hu = build_hankel(traj.inputs, depth);
    const Mat hy = build_hankel(traj.outputs, depth);
    HankelPartition part;
    part.dims = Dims{traj.m(), traj.p(), t_ini, horizon};
    part.u_past = hu.topRows(traj.m() * t_ini);
    part.u_future = hu.bottomRows(traj.m() * horizon);
    part.y_past = hy.topRows(traj.p() * t_ini);
    part.y_future = hy.bottomRows(traj.p() * horizon);
    return part;
}

int excitation_rank(const HankelPartition& part) {
    const int rows = static_cast<int>(part.u_past.rows() + part.y_past.rows() +
                                      part.u_future.rows() + part.y_future.rows());
    Mat stacked(rows, part.cols());
    stacked << part.u_past, part.y_past, part.u_future, part.y_future;
    Eigen::JacobiSVD<Mat> svd(stacked);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    const double tol = std::max<Eigen::Index>(stacked.rows(), stacked.cols()) * sv(0) * 1e-10;
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++rank;
    return rank;
}

Vec column_sample(const HankelPartition& part, int j) {
    if (j < 0 || j >= part.cols())
        throw DimensionError("column_sample: column index " + std::to_string(j) +
                             " out of range [0, " + std::to_string(part.cols()) + ")");
    Vec x(part.dims.regressor_len());
    x << part.u_past.col(j), part.y_past.col(j), part.u_future.col(j);
    return x;
}

namespace {

void format_value(char* buf, size_t n, double v) { std::snprintf(buf, n, "%.17g", v); }

}  // namespace

void save_csv(const SignalTrajectory& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw ParseError("save_csv: cannot open '" + path + "' for writing");
    out << traj.m() << "," << traj.p() << "\n";
    char buf[64];
    for (int t = 0; t < traj.length(); ++t) {
        for (int i = 0; i < traj.m(); ++i) {
            format_value(buf, sizeof(buf), traj.inputs(i, t));
            out << (i == 0 ? "" : ",") << buf;
        }
        for (int i = 0; i < traj.p(); ++i) {
            format_value(buf, sizeof(buf), traj.outputs(i, t));
            out << "," << buf;
        }
        out << "\n";
    }
    if (!out)
        throw ParseError("save_csv: write to '" + path + "' failed");
}

SignalTrajectory load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("load_csv: cannot open '" + path + "'");

    auto split = [](const std::string& line) {
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        return fields;
    };

    std::string line;
    if (!std::getline(in, line))
        throw ParseError("load_csv: '" + path + "' is empty (missing m,p header)");
    const auto header = split(line);
    if (header.size() != 2)
        throw ParseError("load_csv: header of '" + path + "' must be 'm,p'");
    int m = 0, p = 0;
    try {
        m = std::stoi(header[0]);
        p = std::stoi(header[1]);
    } catch (const std::exception&) {
        throw ParseError("load_csv: non-integer header in '" + path + "'");
    }
    if (m < 1 || p < 1)
        throw ParseError("load_csv: header of '" + path + "' declares m=" + std::to_string(m) +
                         ", p=" + std::to_string(p) + "; both must be >= 1");

    std::vector<std::vector<double>> rows;
    int row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) continue;
        const auto fields = split(line);
        if (static_cast<int>(fields.size()) != m + p)
            throw ParseError("load_csv: row " + std::to_string(row_no) + " of '" + path +
                             "' has " + std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(m + p));
        std::vector<double> vals(fields.size());
        for (size_t i = 0; i < fields.size(); ++i) {
            char* end = nullptr;
            vals[i] = std::strtod(fields[i].c_str(), &end);
            if (end == fields[i].c_str() || *end != '\0')
                throw ParseError("load_csv: row " + std::to_string(row_no) + " of '" + path +
                                 "' has a malformed number '" + fields[i] + "'");
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty())
        throw ParseError("load_csv: '" + path + "' contains no samples");

    const int t_len = static_cast<int>(rows.size());
    Mat inputs(m, t_len), outputs(p, t_len);
    for (int t = 0; t < t_len; ++t) {
        for (int i = 0; i < m; ++i) inputs(i, t) = rows[t][i];
        for (int i = 0; i < p; ++i) outputs(i, t) = rows[t][m + i];
    }
    return SignalTrajectory(std::move(inputs), std::move(outputs));
}

}  // namespace rokdeepc
