#include "ssae/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <memory>
#include <sstream>
#include <vector>

namespace ssae {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
    throw std::runtime_error(what + ": " + path.string());
}

}  // namespace

Tensor load_png(const std::filesystem::path& path, bool expand_rgb) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) fail(path, "cannot open image");

    png_byte sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8)) fail(path, "not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "libpng init failed for");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "corrupt PNG");
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (depth == 16) png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "unsupported PNG channel layout in");
    }

    std::vector<png_byte> row(static_cast<size_t>(width) * channels);
    const int out_c = (expand_rgb && channels == 1) ? 3 : channels;
    Tensor img = Tensor::image(out_c, height, width);
    for (int y = 0; y < height; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < width; ++x) {
            for (int ci = 0; ci < out_c; ++ci) {
                const int src = channels == 1 ? 0 : ci;
                img.at(0, ci, y, x) = static_cast<float>(row[x * channels + src]) / 255.0f;
            }
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void save_png(const std::filesystem::path& path, const Tensor& img) {
    if (img.n != 1 || (img.c != 1 && img.c != 3))
        throw std::invalid_argument("save_png expects a single 1- or 3-channel image, got " + img.shape_str());

    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) fail(path, "cannot open for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        fail(path, "libpng init failed for");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(path, "PNG write failed");
    }
    png_init_io(png, fp.get());
    // Timestamps are never embedded, so identical pixels give identical bytes.
    png_set_IHDR(png, info, img.w, img.h, 8,
                 img.c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_byte> row(static_cast<size_t>(img.w) * img.c);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x)
            for (int ci = 0; ci < img.c; ++ci) {
                float f = img.at(0, ci, y, x);
                f = f < 0.0f ? 0.0f : (f > 1.0f ? 1.0f : f);
                row[x * img.c + ci] = static_cast<png_byte>(f * 255.0f + 0.5f);
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::pair<int, int> png_dims(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) fail(path, "cannot open image");
    unsigned char head[24];
    if (std::fread(head, 1, 24, fp.get()) != 24) fail(path, "truncated PNG header in");
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (std::memcmp(head, sig, 8) != 0) fail(path, "not a PNG file");
    auto be32 = [&](int off) {
        return (head[off] << 24) | (head[off + 1] << 16) | (head[off + 2] << 8) | head[off + 3];
    };
    return {be32(20), be32(16)};  // height, width
}

void save_npy(const std::filesystem::path& path, const Tensor& t) {
    std::ostringstream shape;
    if (t.n != 1) throw std::invalid_argument("save_npy expects n=1 tensors");
    if (t.c == 1)
        shape << "(" << t.h << ", " << t.w << ")";
    else
        shape << "(" << t.c << ", " << t.h << ", " << t.w << ")";
    std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': " + shape.str() + ", }";
    const size_t base = 10 + header.size() + 1;
    header.append(((base + 63) / 64) * 64 - base, ' ');
    header.push_back('\n');

    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) fail(path, "cannot open for writing");
    const unsigned char magic[8] = {0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0};
    std::fwrite(magic, 1, 8, fp.get());
    const uint16_t hlen = static_cast<uint16_t>(header.size());
    std::fwrite(&hlen, 2, 1, fp.get());
    std::fwrite(header.data(), 1, header.size(), fp.get());
    if (std::fwrite(t.v.data(), sizeof(float), t.v.size(), fp.get()) != t.v.size())
        fail(path, "short write to");
}

Tensor load_npy(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) fail(path, "cannot open");
    unsigned char magic[8];
    if (std::fread(magic, 1, 8, fp.get()) != 8 || std::memcmp(magic, "\x93NUMPY", 6) != 0)
        fail(path, "not an npy file");
    uint16_t hlen = 0;
    if (std::fread(&hlen, 2, 1, fp.get()) != 1) fail(path, "truncated npy header in");
    std::string header(hlen, '\0');
    if (std::fread(header.data(), 1, hlen, fp.get()) != hlen) fail(path, "truncated npy header in");
    if (header.find("'<f4'") == std::string::npos || header.find("False") == std::string::npos)
        fail(path, "unsupported npy dtype/order in");

    const size_t lp = header.find('(');
    const size_t rp = header.find(')');
    if (lp == std::string::npos || rp == std::string::npos) fail(path, "bad npy shape in");
    std::vector<int> dims;
    std::string inner = header.substr(lp + 1, rp - lp - 1);
    std::stringstream ss(inner);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (tok.find_first_of("0123456789") != std::string::npos) dims.push_back(std::stoi(tok));
    Tensor t;
    if (dims.size() == 2)
        t = Tensor::image(1, dims[0], dims[1]);
    else if (dims.size() == 3)
        t = Tensor::image(dims[0], dims[1], dims[2]);
    else
        fail(path, "unsupported npy rank in");
    if (std::fread(t.v.data(), sizeof(float), t.v.size(), fp.get()) != t.v.size())
        fail(path, "truncated npy payload in");
    return t;
}

}  // namespace ssae
