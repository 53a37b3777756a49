#pragma once

#include <istream>
#include <string>
#include <vector>

#include "ctxsat/core.hpp"

namespace ctxsat {

std::string serialize_model(const MaxSatModel& model);
MaxSatModel deserialize_model(const std::string& text);

// First line is a header object {"n", "metadata"}; every further line is one example.
std::string serialize_dataset(const Dataset& data);
Dataset deserialize_dataset(const std::string& text);

// Soft weights are multiplied by `scale` and rounded; hard clauses carry the top weight.
std::string export_wcnf(const MaxSatModel& model, long long scale = 1000000);

struct CnfFormula {
    int n = 0;
    std::vector<Clause> clauses;
    int dropped_tautologies = 0;
};
CnfFormula parse_dimacs_cnf(const std::string& text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace ctxsat
