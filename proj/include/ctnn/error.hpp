#pragma once

#include <stdexcept>
#include <string>

namespace ctnn {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define CTNN_DEFINE_ERROR(Name)                                      \
    struct Name : Error {                                            \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    }

CTNN_DEFINE_ERROR(ShapeMismatch);
CTNN_DEFINE_ERROR(DimensionMismatch);
CTNN_DEFINE_ERROR(DuplicateCell);
CTNN_DEFINE_ERROR(SingletonRankNonzero);
CTNN_DEFINE_ERROR(RankMonotonicityViolation);
CTNN_DEFINE_ERROR(UnknownCell);
CTNN_DEFINE_ERROR(RankMismatch);
CTNN_DEFINE_ERROR(NeighborOutsideZ);
CTNN_DEFINE_ERROR(NonPositiveWeight);
CTNN_DEFINE_ERROR(SymmetrizationViolation);
CTNN_DEFINE_ERROR(NotScalarLoss);
CTNN_DEFINE_ERROR(DetachedTensor);
CTNN_DEFINE_ERROR(NonFiniteValue);
CTNN_DEFINE_ERROR(EmptyDataset);
CTNN_DEFINE_ERROR(ConfigError);

#undef CTNN_DEFINE_ERROR

}  // namespace ctnn
