#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "anatssm/anat_model.hpp"
#include "anatssm/error.hpp"
#include "anatssm/log.hpp"
#include "anatssm/serialization.hpp"

// After Eigen: httplib pulls in <resolv.h>, whose _res macro breaks Eigen's kernels.
#include <httplib.h>

// HTTP front end over a fixed set of loaded models. The handlers are plain
// functions of (registry, request) so they can be exercised without a socket.

namespace anatssm {

struct ServiceOptions {
  double max_abs_beta_std = 4.0;  // generate rejects requests beyond this many std
  int default_sweep_steps = 13;
  double sweep_range = 3.0;
};

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

using ModelRegistry = std::map<std::string, AnatModel>;

namespace detail {

inline ServiceResponse error_response(int status, const std::string& msg) { return {status, {{"error", msg}}}; }

inline const AnatModel* find_model(const ModelRegistry& reg, const std::string& id) {
  const auto it = reg.find(id);
  return it == reg.end() ? nullptr : &it->second;
}

inline nlohmann::json label_map(const std::vector<std::string>& labels, const Eigen::VectorXd& v) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < labels.size(); ++i) j[labels[i]] = v[static_cast<Eigen::Index>(i)];
  return j;
}

}  // namespace detail

inline nlohmann::json describe_model(const std::string& id, const AnatModel& m) {
  nlohmann::json var = nlohmann::json::array();
  for (const auto& e : variability(m)) var.push_back({{"label", e.label}, {"kappa", e.kappa}, {"fraction", e.fraction}});
  return {{"id", id}, {"kind", kind_name(m.kind)}, {"labels", m.labels}, {"stats", to_json(m.labels, m.stats)}, {"variability", var}};
}

inline ServiceResponse list_models(const ModelRegistry& reg) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [id, m] : reg) out.push_back(describe_model(id, m));
  return {200, out};
}

inline ServiceResponse generate(const ModelRegistry& reg, const std::string& id, const nlohmann::json& body,
                                const ServiceOptions& opt = {}) {
  const AnatModel* model = detail::find_model(reg, id);
  if (!model) return detail::error_response(404, "unknown model '" + id + "'");
  std::map<std::string, double> params;
  if (body.contains("params")) {
    if (!body["params"].is_object()) return detail::error_response(400, "'params' must be an object of label: value");
    for (const auto& [label, v] : body["params"].items()) {
      if (!v.is_number()) return detail::error_response(400, "value for '" + label + "' is not a number");
      params[label] = v.get<double>();
    }
  }
  Eigen::VectorXd beta;
  try {
    beta = standardize_params(*model, params);
  } catch (const UnknownLabelError& e) {
    return detail::error_response(422, e.what());
  }
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    if (std::abs(beta[j]) > opt.max_abs_beta_std)
      return detail::error_response(422, "parameter '" + model->labels[static_cast<std::size_t>(j)] + "' is " +
                                             format_double(beta[j]) + " std from the mean (limit " +
                                             format_double(opt.max_abs_beta_std) + ")");
  const Eigen::VectorXd alpha = coefficients_for(*model, beta);
  const ShapeVector shape = sample(model->base, {alpha});
  nlohmann::json faces = nlohmann::json::array();
  for (const auto& f : model->base.topology.faces)
    for (int idx : f) faces.push_back(idx);
  nlohmann::json out{{"mesh", {{"vertices", detail::to_vector(shape.coords)}, {"faces", faces}}},
                     {"requested", detail::label_map(model->labels, beta)}};
  if (model->setup) {
    try {
      const MeasurementVector mv = measure(model->setup->recipe, landmark_positions(model->setup->landmarks, shape));
      const Eigen::VectorXd measured = standardize_measurements(*model, mv);
      out["measurements"] = to_json(mv);
      out["beta_std"] = detail::label_map(model->labels, measured);
      out["beta_model"] = detail::label_map(model->labels, model_readout(*model, measured));
    } catch (const DegeneracyError& e) {
      out["measurements"] = nlohmann::json::array();
      out["measurement_error"] = e.what();
    }
  }
  return {200, out};
}

inline nlohmann::json to_json(const SweepResult& r) {
  auto rows = [](const Eigen::MatrixXd& m) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index s = 0; s < m.rows(); ++s) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (std::isnan(m(s, c)))
          row.push_back(nullptr);
        else
          row.push_back(m(s, c));
      }
      a.push_back(row);
    }
    return a;
  };
  nlohmann::json slopes = nlohmann::json::object();
  for (std::size_t c = 0; c < r.labels.size(); ++c) {
    const double v = r.slopes[static_cast<Eigen::Index>(c)];
    slopes[r.labels[c]] = std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
  }
  return {{"param", r.label}, {"labels", r.labels}, {"t", r.t},          {"measured", rows(r.measured)},
          {"readout", rows(r.readout)}, {"slopes", slopes}, {"gaps", r.gaps}};
}

inline ServiceResponse sweep_endpoint(const ModelRegistry& reg, const std::string& id, const std::string& param,
                                      const std::string& steps_text, const ServiceOptions& opt = {}) {
  const AnatModel* model = detail::find_model(reg, id);
  if (!model) return detail::error_response(404, "unknown model '" + id + "'");
  if (param.empty()) return detail::error_response(400, "missing query parameter 'param'");
  int steps = opt.default_sweep_steps;
  if (!steps_text.empty()) {
    try {
      std::size_t used = 0;
      steps = std::stoi(steps_text, &used);
      if (used != steps_text.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      return detail::error_response(400, "'steps' must be an integer, got '" + steps_text + "'");
    }
  }
  if (steps < 2 || steps > 1000) return detail::error_response(400, "'steps' must lie in [2, 1000]");
  try {
    return {200, to_json(sweep(*model, param, steps, opt.sweep_range))};
  } catch (const UnknownLabelError& e) {
    return detail::error_response(422, e.what());
  } catch (const DataError& e) {
    return detail::error_response(422, e.what());
  }
}

inline void install_routes(httplib::Server& server, const ModelRegistry& reg, const ServiceOptions& opt = {}) {
  auto send = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get("/models", [&reg, send](const httplib::Request&, httplib::Response& res) { send(res, list_models(reg)); });
  server.Post(R"(/models/([^/]+)/generate)", [&reg, opt, send](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body = nlohmann::json::object();
    if (!req.body.empty()) {
      body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) return send(res, detail::error_response(400, "request body is not a JSON object"));
    }
    send(res, generate(reg, req.matches[1], body, opt));
  });
  server.Get(R"(/models/([^/]+)/sweep)", [&reg, opt, send](const httplib::Request& req, httplib::Response& res) {
    send(res, sweep_endpoint(reg, req.matches[1], req.get_param_value("param"), req.get_param_value("steps"), opt));
  });
  server.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string msg = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      msg = e.what();
    } catch (...) {
    }
    logger().error("request failed: {}", msg);
    send(res, detail::error_response(500, msg));
  });
}

}  // namespace anatssm
