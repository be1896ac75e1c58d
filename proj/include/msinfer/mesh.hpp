#pragma once

#include "errors.hpp"
#include "field.hpp"
#include "rng.hpp"
#include "types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace msinfer {

enum class MeshKind { lattice, knn_graph };

//! Discretization of the working domain: a dense lattice (exact, d <= 4) or
//! a point cloud with a symmetrized kNN graph (scales in dimension).
class DomainMesh {
public:
    static DomainMesh lattice(const Box& box, std::vector<int> resolution) {
        const int d = box.dim();
        if (d > 4) {
            throw InvalidArgumentError(
                "lattice mesh supports d <= 4; use the knn_graph backend");
        }
        if (static_cast<int>(resolution.size()) != d) {
            throw InvalidArgumentError("lattice: resolution size != dimension");
        }
        for (int r : resolution) {
            if (r < 2) throw InvalidArgumentError("lattice: resolution must be >= 2");
        }
        DomainMesh m;
        m.kind_ = MeshKind::lattice;
        m.box_ = box;
        m.resolution_ = std::move(resolution);
        m.pitch_.resize(d);
        Index total = 1;
        for (int j = 0; j < d; ++j) {
            m.pitch_(j) = (box.hi(j) - box.lo(j)) / (m.resolution_[j] - 1);
            total *= m.resolution_[j];
        }
        m.strides_.assign(d, 1);
        for (int j = d - 2; j >= 0; --j) {
            m.strides_[j] = m.strides_[j + 1] * m.resolution_[j + 1];
        }
        m.nodes_.resize(total, d);
        for (Index i = 0; i < total; ++i) {
            Index rem = i;
            for (int j = 0; j < d; ++j) {
                const Index idx = rem / m.strides_[j];
                rem %= m.strides_[j];
                // pin the last node exactly onto the box edge
                m.nodes_(i, j) = idx == m.resolution_[j] - 1
                                     ? box.hi(j)
                                     : box.lo(j) + idx * m.pitch_(j);
            }
        }
        m.node_spacing_ = m.pitch_.maxCoeff();
        return m;
    }

    static DomainMesh lattice(const Box& box, int resolution) {
        return lattice(box, std::vector<int>(box.dim(), resolution));
    }

    //! kNN graph over the given nodes; adjacency is symmetrized.
    static DomainMesh knn_graph(Matrix nodes, int k) {
        const Index m = nodes.rows();
        const int d = static_cast<int>(nodes.cols());
        if (k < d + 1) throw InvalidArgumentError("knn_graph: need k >= d + 1");
        if (m < k + 1) throw InvalidArgumentError("knn_graph: need at least k + 1 nodes");

        DomainMesh mesh;
        mesh.kind_ = MeshKind::knn_graph;
        mesh.box_ = Box::bounding(nodes);
        mesh.k_ = k;
        mesh.nodes_ = std::move(nodes);
        mesh.adjacency_.assign(m, {});

        std::vector<std::pair<double, Index>> dist(m);
        for (Index i = 0; i < m; ++i) {
            for (Index j = 0; j < m; ++j) {
                dist[j] = {(mesh.nodes_.row(i) - mesh.nodes_.row(j)).norm(), j};
            }
            dist[i].first = std::numeric_limits<double>::infinity();
            std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
            for (int t = 0; t < k; ++t) mesh.adjacency_[i].push_back(dist[t].second);
        }
        // symmetrize, dedup, sort
        for (Index i = 0; i < m; ++i) {
            for (Index j : std::vector<Index>(mesh.adjacency_[i])) {
                mesh.adjacency_[j].push_back(i);
            }
        }
        std::vector<double> edge_lengths;
        for (Index i = 0; i < m; ++i) {
            auto& adj = mesh.adjacency_[i];
            std::sort(adj.begin(), adj.end());
            adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
            for (Index j : adj) {
                if (j > i) {
                    edge_lengths.push_back((mesh.nodes_.row(i) - mesh.nodes_.row(j)).norm());
                }
            }
        }
        std::sort(edge_lengths.begin(), edge_lengths.end());
        mesh.node_spacing_ = edge_lengths.empty()
                                 ? 0.0
                                 : edge_lengths[edge_lengths.size() / 2];
        return mesh;
    }

    //! kNN mesh of the sample points plus `n_fill` seeded uniform fill-ins.
    static DomainMesh knn_graph_filled(const Matrix& points, int k, int n_fill,
                                       std::uint64_t seed) {
        if (n_fill <= 0) return knn_graph(points, k);
        const Box box = Box::bounding(points);
        Matrix nodes(points.rows() + n_fill, points.cols());
        nodes.topRows(points.rows()) = points;
        Rng rng = derive_rng(seed, stream::fill);
        for (Index i = 0; i < n_fill; ++i) {
            for (Index j = 0; j < points.cols(); ++j) {
                nodes(points.rows() + i, j) =
                    box.lo(j) + (box.hi(j) - box.lo(j)) * rng.uniform01();
            }
        }
        return knn_graph(std::move(nodes), k);
    }

    MeshKind kind() const { return kind_; }
    const Matrix& nodes() const { return nodes_; }
    Index size() const { return nodes_.rows(); }
    int dim() const { return static_cast<int>(nodes_.cols()); }
    const Box& box() const { return box_; }
    double node_spacing() const { return node_spacing_; }

    const std::vector<int>& resolution() const { return resolution_; }
    const Vector& pitch() const { return pitch_; }
    const std::vector<std::vector<Index>>& adjacency() const { return adjacency_; }
    int k() const { return k_; }

    Vector node(Index i) const { return nodes_.row(i).transpose(); }

    //! Index of the mesh node nearest to x. O(1) on a lattice.
    Index nearest_node(const Vector& x) const {
        if (kind_ == MeshKind::lattice) {
            Index idx = 0;
            for (int j = 0; j < dim(); ++j) {
                const double t = (x(j) - box_.lo(j)) / pitch_(j);
                const Index ij = std::clamp<Index>(static_cast<Index>(std::lround(t)), 0,
                                                   resolution_[j] - 1);
                idx += ij * strides_[j];
            }
            return idx;
        }
        Index best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < size(); ++i) {
            const double dist = (nodes_.row(i).transpose() - x).squaredNorm();
            if (dist < best_dist) {
                best_dist = dist;
                best = i;
            }
        }
        return best;
    }

    //! Visit every mesh edge once as fn(i, j, axis); axis is -1 for kNN edges.
    template <typename F>
    void for_each_edge(F&& fn) const {
        if (kind_ == MeshKind::lattice) {
            const int d = dim();
            for (Index i = 0; i < size(); ++i) {
                Index rem = i;
                for (int j = 0; j < d; ++j) {
                    const Index ij = rem / strides_[j];
                    rem %= strides_[j];
                    if (ij + 1 < resolution_[j]) fn(i, i + strides_[j], j);
                }
            }
        } else {
            for (Index i = 0; i < size(); ++i) {
                for (Index j : adjacency_[i]) {
                    if (j > i) fn(i, j, -1);
                }
            }
        }
    }

    //! (d-1)-area of the dual face crossed by a lattice edge along `axis`.
    double face_area(int axis) const {
        double area = 1.0;
        for (int j = 0; j < dim(); ++j) {
            if (j != axis) area *= pitch_(j);
        }
        return area;
    }

    //! Volume of one lattice node's cell.
    double node_volume() const { return pitch_.prod(); }

private:
    MeshKind kind_ = MeshKind::lattice;
    Matrix nodes_;
    Box box_;
    double node_spacing_ = 0.0;
    // lattice
    std::vector<int> resolution_;
    std::vector<Index> strides_;
    Vector pitch_;
    // knn
    std::vector<std::vector<Index>> adjacency_;
    int k_ = 0;
};

//! How pipelines choose their mesh; 0 means pick a default for the dimension.
struct MeshConfig {
    MeshKind kind = MeshKind::lattice;
    int resolution = 0;
    int k = 0;

    int resolved_resolution(int d) const {
        if (resolution > 0) return resolution;
        if (d <= 2) return 64;
        if (d == 3) return 32;
        return 16;
    }
    int resolved_k(int d) const { return k > 0 ? k : std::max(d + 2, 8); }

    static MeshConfig auto_for(int d) {
        MeshConfig cfg;
        cfg.kind = d <= 3 ? MeshKind::lattice : MeshKind::knn_graph;
        return cfg;
    }

    //! Lattice over `box`, or a kNN graph over `points`.
    DomainMesh build(const Matrix& points, const Box& box) const {
        const int d = static_cast<int>(points.cols());
        if (kind == MeshKind::lattice) {
            return DomainMesh::lattice(box, resolved_resolution(d));
        }
        return DomainMesh::knn_graph(points, resolved_k(d));
    }
};

} // namespace msinfer
