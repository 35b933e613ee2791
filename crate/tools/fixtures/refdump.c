/*
 * Reference dump of a baseline JPEG using libjpeg.
 *
 * Usage: refdump <in.jpg> <out.ref>
 *
 * Output layout (little-endian):
 *   "JREF" u8 version=1
 *   u16 image_width, u16 image_height, u8 num_components
 *   u8 restart_interval_present, u16 restart_interval
 *   quant tables: u8 count, then per table: u8 slot, 64 x u16 (zigzag order)
 *   huffman tables: u8 count, then per table: u8 class (0=DC,1=AC), u8 slot,
 *                   16 x u8 counts, u16 nsym, nsym x u8 symbols
 *   per component:
 *     u8 id, u8 h, u8 v, u8 tq,
 *     u16 wib, u16 hib          (libjpeg width_in_blocks/height_in_blocks)
 *     u16 gw, u16 gh            (coefficient array dims, MCU padded)
 *     gw*gh blocks x 64 x i16   (zigzag order, row-major)
 *   per component (second decode pass with raw_data_out, islow IDCT):
 *     u16 pw, u16 ph, pw*ph x u8 samples
 */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <jpeglib.h>

static const int ZIGZAG_TO_NATURAL[64] = {
     0,  1,  8, 16,  9,  2,  3, 10,
    17, 24, 32, 25, 18, 11,  4,  5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13,  6,  7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63,
};

static void put_u8(FILE *f, unsigned v) { fputc(v & 0xff, f); }
static void put_u16(FILE *f, unsigned v) { put_u8(f, v); put_u8(f, v >> 8); }

static unsigned char *read_file(const char *path, unsigned long *len) {
    FILE *f = fopen(path, "rb");
    if (!f) { perror(path); exit(1); }
    fseek(f, 0, SEEK_END);
    *len = (unsigned long)ftell(f);
    fseek(f, 0, SEEK_SET);
    unsigned char *buf = malloc(*len);
    if (fread(buf, 1, *len, f) != *len) { perror("read"); exit(1); }
    fclose(f);
    return buf;
}

int main(int argc, char **argv) {
    if (argc != 3) {
        fprintf(stderr, "usage: refdump in.jpg out.ref\n");
        return 2;
    }
    unsigned long len;
    unsigned char *data = read_file(argv[1], &len);
    FILE *out = fopen(argv[2], "wb");
    if (!out) { perror(argv[2]); return 1; }

    struct jpeg_decompress_struct cinfo;
    struct jpeg_error_mgr jerr;
    cinfo.err = jpeg_std_error(&jerr);
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, data, len);
    jpeg_read_header(&cinfo, TRUE);
    jvirt_barray_ptr *coefs = jpeg_read_coefficients(&cinfo);

    fwrite("JREF", 1, 4, out);
    put_u8(out, 1);
    put_u16(out, cinfo.image_width);
    put_u16(out, cinfo.image_height);
    put_u8(out, cinfo.num_components);
    put_u8(out, cinfo.restart_interval != 0);
    put_u16(out, cinfo.restart_interval);

    int nq = 0;
    for (int i = 0; i < NUM_QUANT_TBLS; i++) if (cinfo.quant_tbl_ptrs[i]) nq++;
    put_u8(out, nq);
    for (int i = 0; i < NUM_QUANT_TBLS; i++) {
        JQUANT_TBL *q = cinfo.quant_tbl_ptrs[i];
        if (!q) continue;
        put_u8(out, i);
        for (int k = 0; k < 64; k++) put_u16(out, q->quantval[ZIGZAG_TO_NATURAL[k]]);
    }

    int nh = 0;
    for (int i = 0; i < NUM_HUFF_TBLS; i++) {
        if (cinfo.dc_huff_tbl_ptrs[i]) nh++;
        if (cinfo.ac_huff_tbl_ptrs[i]) nh++;
    }
    put_u8(out, nh);
    for (int cls = 0; cls < 2; cls++) {
        for (int i = 0; i < NUM_HUFF_TBLS; i++) {
            JHUFF_TBL *h = cls == 0 ? cinfo.dc_huff_tbl_ptrs[i] : cinfo.ac_huff_tbl_ptrs[i];
            if (!h) continue;
            put_u8(out, cls);
            put_u8(out, i);
            int nsym = 0;
            for (int l = 1; l <= 16; l++) { put_u8(out, h->bits[l]); nsym += h->bits[l]; }
            put_u16(out, nsym);
            for (int s = 0; s < nsym; s++) put_u8(out, h->huffval[s]);
        }
    }

    for (int c = 0; c < cinfo.num_components; c++) {
        jpeg_component_info *ci = &cinfo.comp_info[c];
        int gw = (ci->width_in_blocks + ci->h_samp_factor - 1) / ci->h_samp_factor * ci->h_samp_factor;
        int gh = (ci->height_in_blocks + ci->v_samp_factor - 1) / ci->v_samp_factor * ci->v_samp_factor;
        put_u8(out, ci->component_id);
        put_u8(out, ci->h_samp_factor);
        put_u8(out, ci->v_samp_factor);
        put_u8(out, ci->quant_tbl_no);
        put_u16(out, ci->width_in_blocks);
        put_u16(out, ci->height_in_blocks);
        put_u16(out, gw);
        put_u16(out, gh);
        for (int by = 0; by < gh; by++) {
            JBLOCKARRAY rows = (*cinfo.mem->access_virt_barray)(
                (j_common_ptr)&cinfo, coefs[c], by, 1, FALSE);
            for (int bx = 0; bx < gw; bx++) {
                JCOEF *blk = rows[0][bx];
                for (int k = 0; k < 64; k++) put_u16(out, (unsigned)(unsigned short)blk[ZIGZAG_TO_NATURAL[k]]);
            }
        }
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);

    /* second pass: component sample planes before upsampling/color conversion */
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, data, len);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.raw_data_out = TRUE;
    cinfo.dct_method = JDCT_ISLOW;
    cinfo.out_color_space = cinfo.jpeg_color_space;
    jpeg_start_decompress(&cinfo);

    int ncomp = cinfo.num_components;
    int maxv = cinfo.max_v_samp_factor;
    JSAMPARRAY planes[MAX_COMPONENTS];
    int pw[MAX_COMPONENTS], ph[MAX_COMPONENTS];
    int imcu_rows = (cinfo.output_height + maxv * DCTSIZE - 1) / (maxv * DCTSIZE);
    for (int c = 0; c < ncomp; c++) {
        jpeg_component_info *ci = &cinfo.comp_info[c];
        int gw = (ci->width_in_blocks + ci->h_samp_factor - 1) / ci->h_samp_factor * ci->h_samp_factor;
        pw[c] = gw * DCTSIZE;
        ph[c] = imcu_rows * ci->v_samp_factor * DCTSIZE;
        planes[c] = malloc(sizeof(JSAMPROW) * ph[c]);
        for (int y = 0; y < ph[c]; y++) planes[c][y] = calloc(pw[c] + 64, 1);
    }
    for (int r = 0; r < imcu_rows; r++) {
        JSAMPARRAY bufs[MAX_COMPONENTS];
        for (int c = 0; c < ncomp; c++) {
            bufs[c] = planes[c] + r * cinfo.comp_info[c].v_samp_factor * DCTSIZE;
        }
        jpeg_read_raw_data(&cinfo, bufs, maxv * DCTSIZE);
    }
    for (int c = 0; c < ncomp; c++) {
        put_u16(out, pw[c]);
        put_u16(out, ph[c]);
        for (int y = 0; y < ph[c]; y++) fwrite(planes[c][y], 1, pw[c], out);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    fclose(out);
    free(data);
    return 0;
}
