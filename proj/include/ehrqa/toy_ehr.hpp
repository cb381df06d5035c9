#pragma once
// Seeded toy EHR knowledge graph.
//
// Layout: patient -> admission -> {diagnosis, procedure, prescription, lab}.
// Diagnoses and procedures both carry icd9_code, short_title and long_title,
// and the vocabularies deliberately overlap (a short title that is another
// diagnosis' long title, codes shared between diagnoses and procedures) so
// that value-to-relation ambiguity exists. Node numbers are global, so every
// /id literal is unique across classes.

#include <array>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "ehrqa/kg.hpp"

namespace ehrqa {

struct ToyScale {
    int patients = 50;
    int admissions_per_patient = 2;
};

// Relation and class names; override to mimic other naming schemes
// (e.g. "/diagnoses_short_title").
struct ToySchemaNames {
    std::string id = "/id";
    std::string admission_link = "/hadm";
    std::string diagnosis_link = "/diagnosis";
    std::string procedure_link = "/procedure";
    std::string prescription_link = "/prescription";
    std::string lab_link = "/lab";
    std::string gender = "/gender";
    std::string age = "/age";
    std::string marital_status = "/marital_status";
    std::string ethnicity = "/ethnicity";
    std::string admission_type = "/admission_type";
    std::string admission_location = "/admission_location";
    std::string insurance = "/insurance";
    std::string days_stay = "/days_stay";
    std::string admit_year = "/admit_year";
    std::string diagnosis_code = "/icd9_code";
    std::string diagnosis_short_title = "/short_title";
    std::string diagnosis_long_title = "/long_title";
    std::string procedure_code = "/icd9_code";
    std::string procedure_short_title = "/short_title";
    std::string procedure_long_title = "/long_title";
    std::string drug = "/drug";
    std::string route = "/route";
    std::string formulary_code = "/formulary_drug_cd";
    std::string drug_dose = "/drug_dose";
    std::string lab_name = "/lab_name";
    std::string lab_value = "/lab_value";
    std::string lab_flag = "/flag";
};

namespace toy_vocab {

struct Coded {
    const char* code;
    const char* short_title;
    const char* long_title;
};

inline constexpr std::array<Coded, 18> diagnoses{{
    {"0389", "septicemia nos", "unspecified septicemia"},
    {"486", "pneumonia", "pneumonia organism unspecified"},
    {"4829", "bacterial pneumonia nos", "pneumonia"},
    {"4280", "chf nos", "congestive heart failure unspecified"},
    {"5849", "acute kidney failure nos", "acute kidney failure unspecified"},
    {"51881", "acute respiratry failure", "acute respiratory failure"},
    {"4019", "hypertension nos", "unspecified essential hypertension"},
    {"99591", "sepsis", "sepsis"},
    {"2765", "hypovolemia", "volume depletion"},
    {"27651", "dehydration", "hypovolemia"},
    {"42731", "atrial fibrillation", "atrial fibrillation"},
    {"5990", "urin tract infection nos", "urinary tract infection site not specified"},
    {"2859", "anemia nos", "anemia unspecified"},
    {"V4581", "aortocoronary bypass", "aortocoronary bypass status"},
    {"3051", "tobacco use disorder", "tobacco use disorder"},
    {"V1582", "history of tobacco use", "personal history of tobacco use"},
    {"V5861", "long-term use anticoagul", "long-term current use of anticoagulants"},
    {"V560", "hemodialysis", "encounter for extracorporeal dialysis"},
}};

inline constexpr std::array<Coded, 10> procedures{{
    {"3961", "extracorporeal circulat", "extracorporeal circulation auxiliary to open heart surgery"},
    {"9604", "insert endotracheal tube", "insertion of endotracheal tube"},
    {"9671", "cont inv mec ven <96 hrs", "continuous invasive mechanical ventilation for less than 96 consecutive hours"},
    {"3893", "venous cath nec", "venous catheterization not elsewhere classified"},
    {"9390", "non-invasive mech vent", "non-invasive mechanical ventilation"},
    {"9229", "radiotherapeut proc nec", "other radiotherapeutic procedure"},
    {"4019", "excision lymph node nec", "other excision of lymph node"},
    {"5990", "cystoscopy nec", "other cystoscopy"},
    {"3995", "hemodialysis", "hemodialysis"},
    {"8856", "coronar arteriogr-2 cath", "coronary arteriography using two catheters"},
}};

struct Drug {
    const char* name;
    const char* route;
    const char* code;
    double dose_low;
    double dose_high;
};

inline constexpr std::array<Drug, 10> drugs{{
    {"acetaminophen", "po", "acet325", 325, 1000},
    {"heparin", "sc", "hepa5i", 1000, 5000},
    {"insulin", "sc", "insulin", 2, 20},
    {"furosemide", "iv", "furo40i", 20, 80},
    {"metoprolol tartrate", "po", "meto25", 12.5, 100},
    {"potassium chloride", "iv drip", "kcl20p", 10, 40},
    {"sodium chloride 0.9% flush", "iv", "nacl0.9", 3, 10},
    {"docusate sodium", "po", "docu100", 100, 200},
    {"pantoprazole", "iv", "panto40i", 40, 80},
    {"magnesium sulfate", "iv", "mag2pm", 1, 4},
}};

struct Lab {
    const char* name;
    double normal_low;
    double normal_high;
};

inline constexpr std::array<Lab, 7> labs{{
    {"hemoglobin", 12.0, 17.5},
    {"creatinine", 0.6, 1.3},
    {"glucose", 70, 140},
    {"potassium", 3.5, 5.1},
    {"sodium", 135, 145},
    {"white blood cells", 4.0, 11.0},
    {"platelet count", 150, 400},
}};

inline constexpr std::array<const char*, 4> marital{{"married", "single", "widowed", "divorced"}};
inline constexpr std::array<const char*, 5> ethnicity{
    {"white", "black/african american", "hispanic or latino", "asian", "unknown/not specified"}};
inline constexpr std::array<const char*, 4> admission_types{{"emergency", "elective", "urgent", "newborn"}};
inline constexpr std::array<const char*, 4> admission_locations{
    {"emergency room admit", "phys referral/normal deli", "clinic referral/premature",
     "transfer from hosp/extram"}};
inline constexpr std::array<const char*, 5> insurance{{"medicare", "private", "medicaid", "government", "self pay"}};

}  // namespace toy_vocab

inline KnowledgeGraph generate_toy_ehr_kg(std::uint64_t seed, ToyScale scale = {},
                                          const ToySchemaNames& names = {}) {
    std::mt19937_64 rng(seed);
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    auto uniform_real = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto decimal = [](double v, int places) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.*f", places, v);
        return std::string(buf);
    };

    std::vector<Triple> triples;
    int counter = 0;
    auto node = [&](const char* cls) {
        ++counter;
        return NodeId(std::string("/") + cls + "/" + std::to_string(counter));
    };
    auto lit = [&](const NodeId& s, const std::string& r, std::string v) {
        triples.push_back({s, Relation(r), Literal(std::move(v))});
    };
    auto link = [&](const NodeId& s, const std::string& r, const NodeId& o) {
        triples.push_back({s, Relation(r), o});
    };
    auto with_id = [&](const NodeId& n) { lit(n, names.id, std::to_string(counter)); };

    using namespace toy_vocab;
    for (int p = 0; p < scale.patients; ++p) {
        auto patient = node("patient");
        with_id(patient);
        lit(patient, names.gender, pick(2) ? "m" : "f");
        lit(patient, names.age, std::to_string(uniform_int(18, 90)));
        lit(patient, names.marital_status, marital[pick(marital.size())]);
        lit(patient, names.ethnicity, ethnicity[pick(ethnicity.size())]);
        for (int a = 0; a < scale.admissions_per_patient; ++a) {
            auto adm = node("admission");
            with_id(adm);
            link(patient, names.admission_link, adm);
            lit(adm, names.admission_type, admission_types[pick(admission_types.size())]);
            lit(adm, names.admission_location, admission_locations[pick(admission_locations.size())]);
            lit(adm, names.insurance, insurance[pick(insurance.size())]);
            lit(adm, names.days_stay, std::to_string(uniform_int(1, 30)));
            lit(adm, names.admit_year, std::to_string(uniform_int(2100, 2190)));

            const int n_diag = uniform_int(2, 4);
            for (int i = 0; i < n_diag; ++i) {
                const auto& d = diagnoses[pick(diagnoses.size())];
                auto dn = node("diagnosis");
                link(adm, names.diagnosis_link, dn);
                lit(dn, names.diagnosis_code, d.code);
                lit(dn, names.diagnosis_short_title, d.short_title);
                lit(dn, names.diagnosis_long_title, d.long_title);
            }
            const int n_proc = uniform_int(1, 2);
            for (int i = 0; i < n_proc; ++i) {
                const auto& d = procedures[pick(procedures.size())];
                auto pn = node("procedure");
                link(adm, names.procedure_link, pn);
                lit(pn, names.procedure_code, d.code);
                lit(pn, names.procedure_short_title, d.short_title);
                lit(pn, names.procedure_long_title, d.long_title);
            }
            const int n_rx = uniform_int(1, 3);
            for (int i = 0; i < n_rx; ++i) {
                const auto& d = drugs[pick(drugs.size())];
                auto rx = node("prescription");
                link(adm, names.prescription_link, rx);
                lit(rx, names.drug, d.name);
                lit(rx, names.route, d.route);
                lit(rx, names.formulary_code, d.code);
                lit(rx, names.drug_dose, decimal(uniform_real(d.dose_low, d.dose_high), 1));
            }
            const int n_lab = uniform_int(1, 3);
            for (int i = 0; i < n_lab; ++i) {
                const auto& l = labs[pick(labs.size())];
                auto ln = node("lab");
                link(adm, names.lab_link, ln);
                const double span = l.normal_high - l.normal_low;
                const double v = uniform_real(l.normal_low - 0.3 * span, l.normal_high + 0.3 * span);
                lit(ln, names.lab_name, l.name);
                lit(ln, names.lab_value, decimal(v, 1));
                lit(ln, names.lab_flag, (v < l.normal_low || v > l.normal_high) ? "abnormal" : "normal");
            }
        }
    }
    return KnowledgeGraph(std::move(triples));
}

}  // namespace ehrqa
