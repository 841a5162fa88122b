#include <rmr/csv.hpp>
#include <rmr/errors.hpp>
#include <rmr/model_io.hpp>

namespace rmr {

std::string format_model(const ModelFile &file) {
    if (!file.model.w.allFinite() || !std::isfinite(file.model.b))
        throw ContractViolation("format_model: model is not finite");
    nlohmann::json header = {{"format", kModelFormat},
                             {"rows", file.model.w.rows()},
                             {"cols", file.model.w.cols()},
                             {"b", file.model.b},
                             {"solver", file.solver},
                             {"hyper", file.hyper}};
    return header.dump() + '\n' + format_csv(file.model.w);
}

ModelFile parse_model(std::string_view text) {
    const auto nl = text.find('\n');
    if (nl == std::string_view::npos) throw ParseError("model: missing W block", 1, 0);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text.substr(0, nl));
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("model header: ") + e.what(), 1, 0);
    }
    ModelFile file;
    Eigen::Index rows = 0, cols = 0;
    try {
        if (header.at("format").get<std::string>() != kModelFormat)
            throw ParseError("model header: unsupported format", 1, 0);
        rows = header.at("rows").get<Eigen::Index>();
        cols = header.at("cols").get<Eigen::Index>();
        file.model.b = header.at("b").get<double>();
        file.solver = header.at("solver").get<std::string>();
        file.hyper = header.at("hyper");
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("model header: ") + e.what(), 1, 0);
    }
    Matrix w;
    try {
        w = parse_csv(text.substr(nl + 1));
    } catch (const ParseError &e) {
        // Re-base row numbers onto the whole file.
        throw ParseError("model W block: " + e.detail(), e.row() + 1, e.col());
    }
    if (w.rows() != rows || w.cols() != cols)
        throw ContractViolation("model: W block is " + std::to_string(w.rows()) + "x" +
                                std::to_string(w.cols()) + ", header declares " +
                                std::to_string(rows) + "x" + std::to_string(cols));
    file.model.w = std::move(w);
    return file;
}

void write_model(const std::filesystem::path &path, const ModelFile &file) {
    write_text(path, format_model(file));
}

ModelFile read_model(const std::filesystem::path &path) { return parse_model(read_text(path)); }

} // namespace rmr
