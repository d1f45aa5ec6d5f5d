#include "elate/feature.hpp"

namespace elate {

FeatureSpec FeatureSpec::from_source(std::string source, std::uint64_t created_seq) {
  FeatureSpec f;
  f.program = dsl::parse(source);
  f.source = std::move(source);
  f.created_seq = created_seq;
  return f;
}

}  // namespace elate
