#include "fas/image.hpp"

#include <fstream>
#include <stdexcept>

namespace fas {

namespace {
// Skips whitespace and '#' comments between PPM header tokens.
std::string next_token(std::istream& in) {
    std::string tok;
    char c;
    while (in.get(c)) {
        if (c == '#') {
            std::string junk;
            std::getline(in, junk);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(c);
    }
    return tok;
}
}  // namespace

ImageU8 read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image: " + path);
    if (next_token(in) != "P6") throw std::runtime_error(path + ": not a binary PPM (P6)");
    ImageU8 img;
    img.width = std::stoul(next_token(in));
    img.height = std::stoul(next_token(in));
    const unsigned maxval = unsigned(std::stoul(next_token(in)));
    if (maxval != 255) throw std::runtime_error(path + ": only maxval 255 supported");
    img.pixels.resize(img.width * img.height * 3);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            std::streamsize(img.pixels.size()));
    if (std::size_t(in.gcount()) != img.pixels.size())
        throw std::runtime_error(path + ": truncated pixel data");
    return img;
}

void write_ppm(const std::string& path, const ImageU8& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write image: " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              std::streamsize(img.pixels.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace fas
