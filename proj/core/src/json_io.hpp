#pragma once

// JSON helpers shared by the serializers. Private to the library.

#include <nlohmann/json.hpp>

#include "tensormor/affine.hpp"

namespace tensormor::detail {

nlohmann::json coefficient_to_json(const CoefficientFunction& f);
CoefficientFunction coefficient_from_json(const nlohmann::json& j);

nlohmann::json domain_to_json(const ParameterDomain& d);
ParameterDomain domain_from_json(const nlohmann::json& j);

nlohmann::json bounds_to_json(const StabilityBounds& b);
StabilityBounds bounds_from_json(const nlohmann::json& j);

nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);
/// Row-major nested arrays.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

std::string measure_name(Measure m);
Measure measure_from_name(const std::string& s);

}  // namespace tensormor::detail
