#pragma once

#include "complex.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "types.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace msinfer {

//! Discretized per-cell least-squares fit of the field on (1, x).
struct CellLinearFit {
    double eta = 0.0;
    Vector gamma;
    double rmse = 0.0;
    Index n_nodes = 0;
    bool fallback = false; // intercept-only
};

//! Least squares of the node values on (1, x) over the cell's member nodes;
//! uniform node weights discretize the within-cell L2 integral. Cells with
//! fewer than d + 2 nodes (or a rank-deficient design) fall back to the
//! intercept-only fit.
inline CellLinearFit cell_linear_fit(const Matrix& positions, const Vector& values) {
    const Index n = positions.rows();
    const Index d = positions.cols();
    if (n < 1 || values.size() != n) {
        throw InvalidArgumentError("cell_linear_fit: empty cell or size mismatch");
    }
    CellLinearFit fit;
    fit.n_nodes = n;
    fit.gamma = Vector::Zero(d);

    bool full_fit = n >= d + 2;
    if (full_fit) {
        Matrix design(n, d + 1);
        design.col(0).setOnes();
        design.rightCols(d) = positions;
        Eigen::ColPivHouseholderQR<Matrix> qr(design);
        if (qr.rank() < d + 1) {
            full_fit = false;
        } else {
            const Vector coef = qr.solve(values);
            fit.eta = coef(0);
            fit.gamma = coef.tail(d);
        }
    }
    if (!full_fit) {
        fit.eta = values.mean();
        fit.fallback = true;
    }
    const Vector residual =
        values - (Vector::Constant(n, fit.eta) + positions * fit.gamma);
    fit.rmse = std::sqrt(residual.squaredNorm() / static_cast<double>(n));
    return fit;
}

struct MdsResult {
    Matrix coords; // m x target_dim
    bool padded = false;
};

//! Torgerson classical scaling: double-center the squared-distance matrix
//! and keep the top eigenpairs. Eigenvector signs are fixed so the first
//! nonzero entry is positive; missing positive eigenvalues pad with zeros.
inline MdsResult classical_mds(const Matrix& points, int target_dim = 2) {
    const Index m = points.rows();
    if (m < 1) throw InvalidArgumentError("classical_mds: no points");
    MdsResult out;
    out.coords = Matrix::Zero(m, target_dim);
    if (m == 1) {
        out.padded = true;
        return out;
    }

    Matrix sq(m, m);
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < m; ++j) {
            sq(i, j) = (points.row(i) - points.row(j)).squaredNorm();
        }
    }
    const Matrix centering = Matrix::Identity(m, m) - Matrix::Constant(m, m, 1.0 / m);
    const Matrix gram = -0.5 * centering * sq * centering;

    Eigen::SelfAdjointEigenSolver<Matrix> solver(gram);
    const Vector eigenvalues = solver.eigenvalues(); // ascending
    const double scale = std::max(1.0, std::abs(eigenvalues(m - 1)));
    for (int t = 0; t < target_dim; ++t) {
        const Index rank = m - 1 - t;
        if (rank < 0 || eigenvalues(rank) <= 1e-12 * scale) {
            out.padded = true;
            continue;
        }
        Vector v = solver.eigenvectors().col(rank);
        for (Index i = 0; i < m; ++i) {
            if (std::abs(v(i)) > 1e-12) {
                if (v(i) < 0) v = -v;
                break;
            }
        }
        out.coords.col(t) = v * std::sqrt(eigenvalues(rank));
    }
    return out;
}

//! Bipartite graph of modes and minima; edges are the d-cells annotated
//! with their linear-fit coefficients and a 2-D MDS embedding of the nodes.
struct SignatureGraph {
    enum class NodeKind { mode, min, pseudo_min };

    struct Node {
        int id = 0;
        NodeKind kind = NodeKind::mode;
        Vector position;
        Vector2 embedded = Vector2::Zero();
        double value = 0.0;
    };

    struct Edge {
        int cell_id = 0;
        int mode_node = 0;
        int min_node = 0;
        double eta = 0.0;
        Vector gamma;
        double width = 0.0; // |gamma|_2
        double volume = 0.0;
        double rmse = 0.0;
        bool fallback = false;
    };

    std::vector<Node> nodes;
    std::vector<Edge> edges;
    bool mds_padded = false;
};

inline SignatureGraph build_signature_graph(const ComplexDecomposition& dec,
                                            const CellStats& stats) {
    if (dec.n_cells() < 1) {
        throw InvalidArgumentError("build_signature_graph: empty decomposition");
    }
    const int n_modes = static_cast<int>(dec.critical.modes.size());
    const int n_minima = static_cast<int>(dec.critical.minima.size());
    bool any_diverged = false;
    for (const auto& cell : dec.cells) any_diverged |= cell.min_id == kDivergedMin;

    SignatureGraph graph;
    for (int k = 0; k < n_modes; ++k) {
        graph.nodes.push_back({k, SignatureGraph::NodeKind::mode,
                               dec.critical.modes[k].location, Vector2::Zero(),
                               dec.critical.modes[k].value});
    }
    for (int k = 0; k < n_minima; ++k) {
        graph.nodes.push_back({n_modes + k, SignatureGraph::NodeKind::min,
                               dec.critical.minima[k].location, Vector2::Zero(),
                               dec.critical.minima[k].value});
    }
    if (any_diverged) {
        // anchor the pseudo-minimum at the centroid of the diverged cells,
        // valued at the lowest node value seen there
        Vector centroid = Vector::Zero(dec.mesh.dim());
        double lowest = std::numeric_limits<double>::infinity();
        Index count = 0;
        for (const auto& cell : dec.cells) {
            if (cell.min_id != kDivergedMin) continue;
            for (Index node : cell.members) {
                centroid += dec.mesh.node(node);
                lowest = std::min(lowest, dec.node_values[node]);
                ++count;
            }
        }
        centroid /= static_cast<double>(count);
        graph.nodes.push_back({n_modes + n_minima, SignatureGraph::NodeKind::pseudo_min,
                               centroid, Vector2::Zero(), lowest});
    }

    graph.edges.resize(dec.cells.size());
    parallel_for(dec.cells.size(), [&](std::size_t c) {
        const Cell& cell = dec.cells[c];
        Matrix positions(static_cast<Index>(cell.members.size()), dec.mesh.dim());
        Vector values(static_cast<Index>(cell.members.size()));
        for (std::size_t r = 0; r < cell.members.size(); ++r) {
            positions.row(static_cast<Index>(r)) = dec.mesh.nodes().row(cell.members[r]);
            values(static_cast<Index>(r)) = dec.node_values[cell.members[r]];
        }
        const CellLinearFit fit = cell_linear_fit(positions, values);
        SignatureGraph::Edge& edge = graph.edges[c];
        edge.cell_id = static_cast<int>(c);
        edge.mode_node = cell.mode_id;
        edge.min_node = cell.min_id == kDivergedMin ? n_modes + n_minima
                                                    : n_modes + cell.min_id;
        edge.eta = fit.eta;
        edge.gamma = fit.gamma;
        edge.width = fit.gamma.norm();
        edge.volume = stats.volumes[c];
        edge.rmse = fit.rmse;
        edge.fallback = fit.fallback;
    });

    Matrix node_positions(static_cast<Index>(graph.nodes.size()), dec.mesh.dim());
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        node_positions.row(static_cast<Index>(i)) = graph.nodes[i].position.transpose();
    }
    const MdsResult mds = classical_mds(node_positions, 2);
    graph.mds_padded = mds.padded;
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        graph.nodes[i].embedded = mds.coords.row(static_cast<Index>(i)).transpose();
    }
    return graph;
}

//! The piecewise-linear approximation value at x: the linear fit of x's cell.
inline double approximation_value(const SignatureGraph& graph,
                                  const ComplexDecomposition& dec, const Vector& x) {
    const int cell = dec.cell_at(x);
    if (cell < 0) throw InvalidArgumentError("approximation_value: x is in no active cell");
    const auto& edge = graph.edges[cell];
    return edge.eta + edge.gamma.dot(x);
}

inline const char* to_string(SignatureGraph::NodeKind kind) {
    switch (kind) {
        case SignatureGraph::NodeKind::mode: return "mode";
        case SignatureGraph::NodeKind::min: return "min";
        case SignatureGraph::NodeKind::pseudo_min: return "diverged-pseudo-min";
    }
    return "?";
}

//! Schema "mss-v1".
inline nlohmann::json signature_to_json(const SignatureGraph& graph) {
    nlohmann::json j;
    j["schema"] = "mss-v1";
    j["mds_padded"] = graph.mds_padded;
    j["nodes"] = nlohmann::json::array();
    for (const auto& node : graph.nodes) {
        nlohmann::json jn;
        jn["id"] = node.id;
        jn["kind"] = to_string(node.kind);
        jn["position"] = std::vector<double>(node.position.data(),
                                             node.position.data() + node.position.size());
        jn["embedded"] = {node.embedded(0), node.embedded(1)};
        jn["value"] = node.value;
        j["nodes"].push_back(std::move(jn));
    }
    j["edges"] = nlohmann::json::array();
    for (const auto& edge : graph.edges) {
        nlohmann::json je;
        je["cell_id"] = edge.cell_id;
        je["mode_node"] = edge.mode_node;
        je["min_node"] = edge.min_node;
        je["eta"] = edge.eta;
        je["gamma"] =
            std::vector<double>(edge.gamma.data(), edge.gamma.data() + edge.gamma.size());
        je["width"] = edge.width;
        je["volume"] = edge.volume;
        je["rmse"] = edge.rmse;
        je["fallback"] = edge.fallback;
        j["edges"].push_back(std::move(je));
    }
    return j;
}

//! DOT export; edge pen widths scale linearly into [0.5, 5].
inline std::string signature_to_dot(const SignatureGraph& graph) {
    double w_min = std::numeric_limits<double>::infinity();
    double w_max = -std::numeric_limits<double>::infinity();
    for (const auto& edge : graph.edges) {
        w_min = std::min(w_min, edge.width);
        w_max = std::max(w_max, edge.width);
    }
    auto pen = [&](double w) {
        if (!(w_max > w_min)) return 2.75;
        return 0.5 + 4.5 * (w - w_min) / (w_max - w_min);
    };

    std::ostringstream out;
    out << "graph signature {\n";
    for (const auto& node : graph.nodes) {
        out << "  n" << node.id << " [kind=\"" << to_string(node.kind) << "\" value=\""
            << format_double(node.value) << "\" pos=\"" << format_double(node.embedded(0))
            << "," << format_double(node.embedded(1)) << "\"];\n";
    }
    for (const auto& edge : graph.edges) {
        out << "  n" << edge.mode_node << " -- n" << edge.min_node << " [penwidth=\""
            << format_double(pen(edge.width)) << "\" width=\"" << format_double(edge.width)
            << "\" cell=\"" << edge.cell_id << "\"];\n";
    }
    out << "}\n";
    return out.str();
}

} // namespace msinfer
