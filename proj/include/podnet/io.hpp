#pragma once

#include <string>

#include <Eigen/Dense>

#include "podnet/mesh.hpp"
#include "podnet/net.hpp"
#include "podnet/perm.hpp"
#include "podnet/pod.hpp"

namespace podnet {

/// Nodal field as "x,y,value" CSV, one row per node in node-id order.
void write_field_csv(const std::string& path, const StructuredMesh& mesh,
                     const Eigen::VectorXd& full);
Eigen::VectorXd read_field_csv(const std::string& path, const StructuredMesh& mesh);

/// 8-bit binary PGM, min-max scaled, top image row = y = 1.
void write_field_pgm(const std::string& path, const StructuredMesh& mesh,
                     const Eigen::VectorXd& full);

/// Element-major value grid; the sidecar holds the channel parameters,
/// contrast and seed needed to regenerate the field exactly.
void write_perm_csv(const std::string& path, const PermField& field);
void write_perm_sidecar(const std::string& path, const PermField& field);
PermField read_perm(const std::string& csv_path, const std::string& sidecar_path);

/// Reduced-basis bundle: versioned text header, singular values, node ids,
/// mode weights and the basis matrix (one line per column).
struct BasisBundle {
    int nx = 0, ny = 0;
    Eigen::VectorXd sigma;
    NodalBasis basis;
};

void write_basis_bundle(const std::string& path, const PodBasis& pod, const NodalBasis& basis,
                        const StructuredMesh& mesh);
BasisBundle read_basis_bundle(const std::string& path, const StructuredMesh& mesh);

/// Binary network bundle; layout documented in docs/formats.md. The JSON
/// export carries the same content for interop.
void write_network_bundle(const std::string& path, const Network& net);
Network read_network_bundle(const std::string& path);
std::string network_to_json(const Network& net);

/// One pair per row: provenance, run, step, x features, y targets.
void write_dataset_csv(const std::string& path, const Dataset& data);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace podnet
