#include "fvv/error.hpp"

namespace fvv {

const char* to_string(TsErrorKind kind) {
  switch (kind) {
    case TsErrorKind::Alignment: return "alignment";
    case TsErrorKind::SyncLoss: return "sync loss";
    case TsErrorKind::ContinuityGap: return "continuity gap";
    case TsErrorKind::TruncatedPes: return "truncated PES";
    case TsErrorKind::TableMismatch: return "PAT/PMT mismatch";
  }
  return "unknown";
}

}  // namespace fvv
