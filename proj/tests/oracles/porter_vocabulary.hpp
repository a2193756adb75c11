#pragma once

#include <utility>

namespace oracle {

// Input/output pairs from the published Porter test vocabulary
// (voc.txt / output.txt accompanying the reference implementation).
inline constexpr std::pair<const char*, const char*> kPorterVocabulary[] = {
    {"caresses", "caress"},       {"ponies", "poni"},           {"ties", "ti"},
    {"caress", "caress"},         {"cats", "cat"},              {"feed", "feed"},
    {"agreed", "agre"},           {"plastered", "plaster"},     {"bled", "bled"},
    {"motoring", "motor"},        {"sing", "sing"},             {"conflated", "conflat"},
    {"troubled", "troubl"},       {"sized", "size"},            {"hopping", "hop"},
    {"tanned", "tan"},            {"falling", "fall"},          {"hissing", "hiss"},
    {"fizzed", "fizz"},           {"failing", "fail"},          {"filing", "file"},
    {"happy", "happi"},           {"sky", "sky"},               {"running", "run"},
    {"relational", "relat"},      {"conditional", "condit"},    {"rational", "ration"},
    {"valenci", "valenc"},        {"hesitanci", "hesit"},       {"digitizer", "digit"},
    {"conformabli", "conform"},   {"radicalli", "radic"},       {"differentli", "differ"},
    {"vileli", "vile"},           {"analogousli", "analog"},    {"vietnamization", "vietnam"},
    {"predication", "predic"},    {"operator", "oper"},         {"feudalism", "feudal"},
    {"decisiveness", "decis"},    {"hopefulness", "hope"},      {"callousness", "callous"},
    {"formaliti", "formal"},      {"sensitiviti", "sensit"},    {"sensibiliti", "sensibl"},
    {"triplicate", "triplic"},    {"formative", "form"},        {"formalize", "formal"},
    {"electriciti", "electr"},    {"electrical", "electr"},     {"hopeful", "hope"},
    {"goodness", "good"},         {"revival", "reviv"},         {"allowance", "allow"},
    {"inference", "infer"},       {"airliner", "airlin"},       {"gyroscopic", "gyroscop"},
    {"adjustable", "adjust"},     {"defensible", "defens"},     {"irritant", "irrit"},
    {"replacement", "replac"},    {"adjustment", "adjust"},     {"dependent", "depend"},
    {"adoption", "adopt"},        {"homologou", "homolog"},     {"communism", "commun"},
    {"activate", "activ"},        {"angulariti", "angular"},    {"homologous", "homolog"},
    {"effective", "effect"},      {"bowdlerize", "bowdler"},    {"probate", "probat"},
    {"rate", "rate"},             {"cease", "ceas"},            {"controll", "control"},
    {"roll", "roll"},             {"generalizations", "gener"}, {"oscillators", "oscil"},
    {"abandoned", "abandon"},     {"abilities", "abil"},        {"accountant", "account"},
    {"bankruptcy", "bankruptci"}, {"continuing", "continu"},    {"operations", "oper"},
    {"uncertainty", "uncertainti"}, {"going", "go"},            {"concern", "concern"},
    {"auditor", "auditor"},       {"statements", "statement"},  {"generously", "gener"},
    {"is", "is"},                 {"as", "as"},                 {"a", "a"},
};

} // namespace oracle
