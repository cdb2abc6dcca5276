#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "ggps/data_pipeline.hpp"
#include "ggps/schur.hpp"

// Trained-model persistence. The file is a little-endian binary container:
//
//   "GGPS"  u32 version
//   repeated sections, each  tag[4]  u64 payload_bytes  payload
//   tags in order: META NORM QUAD PART, one BIN per partition cell, END
//
// Scalars are raw little-endian, strings and arrays are length-prefixed,
// matrices are (rows, cols, column-major doubles). Writing is deterministic:
// identical inputs produce identical bytes. Bins can be appended one at a
// time so the offline precompute never has to hold more than one corrected
// inverse in memory, and the reader mirrors that with a per-bin callback.

namespace ggps {

inline constexpr std::uint32_t kArtifactVersion = 1;

struct ArtifactMeta {
    KernelParams kernel;
    std::vector<int> grad_dims;
    bool with_schur = true;
    double eps = 1e-3;
    std::uint64_t seed = 0;
    int n_train = 0;
    std::string oracle_version;
    NormStats stats;
    QuadParams quad;
    Eigen::MatrixXd centroids;   // n_bins x input dim
};

struct ArtifactBin {
    int id = 0;
    int solver_iterations = 0;
    double solver_residual = 0.0;
    std::vector<int> near_pt_idx;
    Eigen::MatrixXd near_pts;    // n_near x input dim
    Eigen::MatrixXd S_inv;       // near rows x near rows
    Eigen::MatrixXd W;           // near rows x n_out
};

// Append-oriented writer: header and metadata go out in the constructor,
// add_bin streams each precomputed cell, finish seals the file with the END
// section and verifies the bin count against meta.centroids. A writer
// destroyed before finish leaves the file without END, which the reader
// rejects; it never throws from the destructor.
class ArtifactWriter {
  public:
    ArtifactWriter(const std::string& path, const ArtifactMeta& meta);
    ArtifactWriter(const ArtifactWriter&) = delete;
    ArtifactWriter& operator=(const ArtifactWriter&) = delete;
    ~ArtifactWriter();

    void add_bin(const BinPrecomp& bin);
    void finish();

  private:
    std::ofstream out_;
    std::string path_;
    int bins_expected_ = 0;
    int bins_written_ = 0;
    bool finished_ = false;
};

// One-call save for models small enough to precompute eagerly.
void save_artifact(const std::string& path, const ArtifactMeta& meta,
                   const std::vector<BinPrecomp>& bins);

struct LoadedArtifact {
    ArtifactMeta meta;
    std::vector<ArtifactBin> bins;
};

LoadedArtifact load_artifact(const std::string& path);

// Streaming read: metadata lands in meta, then on_bin is invoked once per
// BIN section in file order. Throws std::runtime_error on malformed or
// truncated files (bad magic, unknown tag, missing END, shape mismatches)
// and std::invalid_argument on an unsupported version.
void load_artifact_stream(const std::string& path, ArtifactMeta& meta,
                          const std::function<void(ArtifactBin&&)>& on_bin);

} // namespace ggps
