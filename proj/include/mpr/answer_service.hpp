#pragma once

#include "mpr/gateway_server.hpp"
#include "mpr/retrieval_pipeline.hpp"

namespace mpr {

/// POST /v1/answer {"question", "image_ref" | "image_b64", "k"} -> AnswerTrace.
class AnswerService final : public HttpService {
public:
    explicit AnswerService(const RetrievalPipeline& pipeline);

private:
    const RetrievalPipeline& pipeline_;
};

}  // namespace mpr
