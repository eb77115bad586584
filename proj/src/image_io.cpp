#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>

#include <jpeglib.h>

#include "absnet/corpus.hpp"
#include "absnet/errors.hpp"

namespace absnet {

namespace {

bool is_png(std::string_view b) { return b.size() >= 8 && b.substr(0, 8) == "\x89PNG\r\n\x1a\n"; }
bool is_jpeg(std::string_view b) {
    return b.size() >= 3 && static_cast<unsigned char>(b[0]) == 0xFF && static_cast<unsigned char>(b[1]) == 0xD8 &&
           static_cast<unsigned char>(b[2]) == 0xFF;
}

RgbImage decode_png(std::string_view bytes) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw data_error("UndecodableImage", std::string("png: ") + image.message);
    image.format = PNG_FORMAT_RGB;
    RgbImage out;
    out.height = static_cast<int>(image.height);
    out.width = static_cast<int>(image.width);
    out.data.resize(PNG_IMAGE_SIZE(image));
    // Transparent pixels are composited onto white.
    png_color background{255, 255, 255};
    if (!png_image_finish_read(&image, &background, out.data.data(), 0, nullptr)) {
        png_image_free(&image);
        throw data_error("UndecodableImage", std::string("png: ") + image.message);
    }
    return out;
}

struct JpegError {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegError*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

RgbImage decode_jpeg(std::string_view bytes) {
    jpeg_decompress_struct cinfo{};
    JpegError err{};
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_exit;
    RgbImage out;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw data_error("UndecodableImage", std::string("jpeg: ") + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    out.width = static_cast<int>(cinfo.output_width);
    out.height = static_cast<int>(cinfo.output_height);
    out.data.resize(std::size_t(out.width) * out.height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        unsigned char* row = out.data.data() + std::size_t(cinfo.output_scanline) * out.width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return out;
}

}  // namespace

RgbImage decode_image(std::string_view bytes) {
    if (is_png(bytes)) return decode_png(bytes);
    if (is_jpeg(bytes)) return decode_jpeg(bytes);
    throw data_error("UndecodableImage", "unrecognised image format");
}

std::string encode_png(const RgbImage& img) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.data.data(), 0, nullptr))
        throw data_error("ImageWriteFailed", image.message);
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.data.data(), 0, nullptr))
        throw data_error("ImageWriteFailed", image.message);
    out.resize(size);
    return out;
}

RgbImage resize_bilinear(const RgbImage& img, int out_h, int out_w) {
    if (img.height == out_h && img.width == out_w) return img;
    RgbImage out;
    out.height = out_h;
    out.width = out_w;
    out.data.resize(std::size_t(out_h) * out_w * 3);
    const double sy = static_cast<double>(img.height) / out_h;
    const double sx = static_cast<double>(img.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
        int y0 = static_cast<int>(fy);
        int y1 = std::min(y0 + 1, img.height - 1);
        double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
            int x0 = static_cast<int>(fx);
            int x1 = std::min(x0 + 1, img.width - 1);
            double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                auto px = [&](int yy, int xx) {
                    return static_cast<double>(img.data[(std::size_t(yy) * img.width + xx) * 3 + c]);
                };
                double v = (1 - wy) * ((1 - wx) * px(y0, x0) + wx * px(y0, x1)) +
                           wy * ((1 - wx) * px(y1, x0) + wx * px(y1, x1));
                out.data[(std::size_t(y) * out_w + x) * 3 + c] =
                    static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return out;
}

PreprocessedImage to_preprocessed(const RgbImage& img) {
    PreprocessedImage out;
    out.height = img.height;
    out.width = img.width;
    out.pixels.resize(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.pixels[i] = static_cast<float>(img.data[i]) / 127.5f - 1.0f;
    return out;
}

RgbImage to_rgb(std::span<const float> hwc, int height, int width) {
    RgbImage out;
    out.height = height;
    out.width = width;
    out.data.resize(hwc.size());
    for (std::size_t i = 0; i < hwc.size(); ++i) {
        float v = std::clamp(hwc[i], -1.0f, 1.0f);
        out.data[i] = static_cast<std::uint8_t>(std::lround((v + 1.0f) * 127.5f));
    }
    return out;
}

RgbImage to_rgb(const PreprocessedImage& img) { return to_rgb(img.pixels, img.height, img.width); }

PreprocessedImage preprocess_image(std::string_view image_bytes, int size) {
    if (size <= 0) throw usage_error("InvalidArgument", "image size must be positive");
    return to_preprocessed(resize_bilinear(decode_image(image_bytes), size, size));
}

}  // namespace absnet
