#include "mpr/answer_service.hpp"

#include <httplib.h>

namespace mpr {

using nlohmann::json;

AnswerService::AnswerService(const RetrievalPipeline& pipeline) : pipeline_(pipeline) {
    server().Post("/v1/answer", [this](const httplib::Request& req, httplib::Response& res) {
        auto fail = [&](int status, const std::string& what) {
            res.status = status;
            res.set_content(json{{"error", what}}.dump(), "application/json");
        };
        try {
            const json body = json::parse(req.body);
            Query query;
            query.question = body.at("question").get<std::string>();
            if (query.question.empty()) return fail(400, "question is empty");
            const long long k = body.value("k", 1LL);
            if (k < 0) return fail(400, "k must be non-negative");
            const bool has_image = (body.contains("image_ref") && body["image_ref"].is_string()) ||
                                   (body.contains("image_b64") && body["image_b64"].is_string());
            if (!has_image) return fail(400, "request needs \"image_ref\" or \"image_b64\"");
            query.image = wire::image_from_json(body);
            query.image_ref = query.image->kind == ImageSource::Kind::reference ? query.image->data : "<inline>";
            if (body.contains("q_type") && body["q_type"].is_string()) query.q_type = body["q_type"].get<std::string>();
            const AnswerTrace trace = pipeline_.answer(query, static_cast<std::size_t>(k));
            res.status = 200;
            res.set_content(trace.to_json().dump(), "application/json");
        } catch (const json::exception& e) {
            fail(400, std::string("malformed request: ") + e.what());
        } catch (const ImageNotFound& e) {
            fail(404, e.what());
        } catch (const GatewayUnavailable& e) {
            fail(503, e.what());
        } catch (const GatewayError& e) {
            fail(502, e.what());
        } catch (const Error& e) {
            fail(400, e.what());
        } catch (const std::exception& e) {
            fail(500, e.what());
        }
    });
}

}  // namespace mpr
