#include "fundus/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "fundus/errors.hpp"
#include "fundus/text.hpp"

namespace fs = std::filesystem;

namespace fundus {

void write_dataset(const std::string& dir, const std::vector<Sample>& samples) {
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "images", ec);
    if (ec) throw IoFailure("cannot create " + dir + "/images: " + ec.message());
    const bool any_mask =
        std::any_of(samples.begin(), samples.end(),
                    [](const Sample& s) { return s.mask.has_value(); });
    if (any_mask) {
        fs::create_directories(fs::path(dir) / "masks", ec);
        if (ec) throw IoFailure("cannot create " + dir + "/masks");
    }

    std::ofstream csv(fs::path(dir) / "labels.csv",
                      std::ios::binary | std::ios::trunc);
    if (!csv) throw IoFailure("cannot write " + dir + "/labels.csv");
    csv << "id,glaucoma,cdr\n";
    for (const Sample& s : samples) {
        write_ppm(s.image, (fs::path(dir) / "images" / (s.id + ".ppm")).string());
        if (s.mask) {
            write_pgm(*s.mask,
                      (fs::path(dir) / "masks" / (s.id + ".pgm")).string());
        }
        csv << s.id << ",";
        if (s.glaucoma) csv << *s.glaucoma;
        csv << ",";
        if (s.cdr) csv << format_double(*s.cdr);
        csv << "\n";
    }
    csv.flush();
    if (!csv) throw IoFailure("write failed for " + dir + "/labels.csv");
}

std::vector<Sample> read_dataset(const std::string& dir) {
    const fs::path csv_path = fs::path(dir) / "labels.csv";
    std::ifstream csv(csv_path, std::ios::binary);
    if (!csv) throw DatasetInvalid("missing " + csv_path.string());

    std::string line;
    if (!std::getline(csv, line) || trim(line) != "id,glaucoma,cdr") {
        throw DatasetInvalid("bad labels.csv header in " + dir);
    }

    std::vector<Sample> samples;
    std::set<std::string> seen;
    while (std::getline(csv, line)) {
        line = trim(line);
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 3 || fields[0].empty()) {
            throw DatasetInvalid("bad labels.csv row: '" + line + "'");
        }
        Sample s;
        s.id = fields[0];
        if (!seen.insert(s.id).second) {
            throw DatasetInvalid("duplicate id " + s.id + " in " + dir);
        }
        if (!fields[1].empty()) {
            if (fields[1] != "0" && fields[1] != "1") {
                throw DatasetInvalid("glaucoma label for " + s.id +
                                     " must be 0 or 1");
            }
            s.glaucoma = fields[1] == "1" ? 1 : 0;
        }
        if (!fields[2].empty()) {
            s.cdr = parse_double(fields[2], "labels.csv cdr");
        }

        const fs::path image_path = fs::path(dir) / "images" / (s.id + ".ppm");
        if (!fs::exists(image_path)) {
            throw DatasetInvalid("missing image for id " + s.id);
        }
        s.image = read_ppm(image_path.string());
        const fs::path mask_path = fs::path(dir) / "masks" / (s.id + ".pgm");
        if (fs::exists(mask_path)) s.mask = read_pgm(mask_path.string());
        samples.push_back(std::move(s));
    }
    std::sort(samples.begin(), samples.end(),
              [](const Sample& a, const Sample& b) { return a.id < b.id; });
    return samples;
}

} // namespace fundus
