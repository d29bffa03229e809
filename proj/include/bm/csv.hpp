#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bm/batch.hpp"
#include "bm/checkpoint.hpp"
#include "bm/sampling.hpp"

namespace bm {

struct CsvError : std::runtime_error {
    int row;
    CsvError(const std::string& msg, int row_)
        : std::runtime_error(msg + " (row " + std::to_string(row_) + ")"), row(row_) {}
};

/// Endpoint rows: path_id,x0_0..x0_{d-1},x1_0..x1_{d-1}.
inline void write_endpoints_csv(std::ostream& os, const PairedBatch& batch) {
    const int d = batch.dim();
    os << "path_id";
    for (int j = 0; j < d; ++j) os << ",x0_" << j;
    for (int j = 0; j < d; ++j) os << ",x1_" << j;
    os << '\n';
    for (std::size_t i = 0; i < batch.size(); ++i) {
        os << i;
        for (int j = 0; j < d; ++j) os << ',' << detail::fmt_double(batch.x0s[i][j]);
        for (int j = 0; j < d; ++j) os << ',' << detail::fmt_double(batch.x1s[i][j]);
        os << '\n';
    }
}

/// Trajectory rows: path_id,step,t,x_0..x_{d-1},pred_0..pred_{d-1}.
inline void write_trajectories_csv(std::ostream& os, const std::vector<Trajectory>& trajs, int dim) {
    os << "path_id,step,t";
    for (int j = 0; j < dim; ++j) os << ",x_" << j;
    for (int j = 0; j < dim; ++j) os << ",pred_" << j;
    os << '\n';
    for (std::size_t p = 0; p < trajs.size(); ++p) {
        const Trajectory& tr = trajs[p];
        for (std::size_t i = 0; i < tr.states.size(); ++i) {
            os << p << ',' << i << ',' << detail::fmt_double(tr.times[i]);
            for (int j = 0; j < dim; ++j) os << ',' << detail::fmt_double(tr.states[i][j]);
            for (int j = 0; j < dim; ++j) os << ',' << detail::fmt_double(tr.endpoint_preds[i][j]);
            os << '\n';
        }
    }
}

/// Snapshot rows: path_id,pred_0..pred_{d-1}, the endpoint predictions of a
/// set of trajectories at one grid index.
inline void write_snapshot_csv(std::ostream& os, const std::vector<Trajectory>& trajs, int dim,
                               std::size_t grid_index) {
    os << "path_id";
    for (int j = 0; j < dim; ++j) os << ",pred_" << j;
    os << '\n';
    for (std::size_t p = 0; p < trajs.size(); ++p) {
        if (grid_index >= trajs[p].endpoint_preds.size())
            throw std::invalid_argument("write_snapshot_csv: grid index out of range");
        os << p;
        for (int j = 0; j < dim; ++j)
            os << ',' << detail::fmt_double(trajs[p].endpoint_preds[grid_index][j]);
        os << '\n';
    }
}

inline void write_loss_log_csv(std::ostream& os, const std::vector<std::pair<int, double>>& log) {
    os << "step,loss\n";
    for (const auto& [step, loss] : log)
        os << step << ',' << detail::fmt_double(loss) << '\n';
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(field);
    return out;
}

} // namespace detail

/// Read an endpoint CSV produced by write_endpoints_csv. Dimension is
/// inferred from the header.
inline PairedBatch read_endpoints_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw CsvError("missing header", 0);
    const auto header = detail::split_csv_line(line);
    if (header.empty() || header[0] != "path_id") throw CsvError("bad header", 0);
    if ((header.size() - 1) % 2 != 0) throw CsvError("bad header width", 0);
    const int d = static_cast<int>((header.size() - 1) / 2);
    if (d < 1) throw CsvError("bad header width", 0);

    PairedBatch batch;
    int row = 0;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (static_cast<int>(fields.size()) != 1 + 2 * d) throw CsvError("bad field count", row);
        Vec x0(d), x1(d);
        try {
            for (int j = 0; j < d; ++j) x0[j] = std::stod(fields[1 + j]);
            for (int j = 0; j < d; ++j) x1[j] = std::stod(fields[1 + d + j]);
        } catch (const std::exception&) {
            throw CsvError("bad numeric field", row);
        }
        batch.push(std::move(x0), std::move(x1));
    }
    return batch;
}

inline PairedBatch read_endpoints_csv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("read_endpoints_csv: cannot open " + path);
    return read_endpoints_csv(is);
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << content;
    if (!os) throw std::runtime_error("write failed for " + path);
}

} // namespace bm
