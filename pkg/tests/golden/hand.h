/* Quantized random forest: 3 trees, 2 classes, 15 nodes, 9 leaves. Generated by adarf. */
#ifndef HAND_MODEL_H
#define HAND_MODEL_H

#include <stdint.h>

#define HAND_N_TREES 3
#define HAND_N_CLASSES 2
#define HAND_N_FEATURES 2
#define HAND_N_NODES 15
#define HAND_N_LEAVES 9
#define HAND_MAX_DEPTH 2
#define HAND_LEAF_ONE 16384

/* fidx == -1 marks a leaf, whose right field indexes LEAVES; the left child of node i is node i + 1 */
typedef struct {
    int16_t fidx;
    int16_t th;
    uint16_t right;
} hand_node_t;

static const hand_node_t HAND_FOREST[HAND_N_NODES] = {
    {0, 0, 4}, /* 0 */
    {1, 0, 3}, /* 1 */
    {-1, 0, 0}, /* 2 */
    {-1, 0, 1}, /* 3 */
    {1, -16384, 6}, /* 4 */
    {-1, 0, 2}, /* 5 */
    {-1, 0, 3}, /* 6 */
    {1, 6553, 9}, /* 7 */
    {-1, 0, 4}, /* 8 */
    {-1, 0, 5}, /* 9 */
    {0, -13107, 12}, /* 10 */
    {-1, 0, 6}, /* 11 */
    {1, -6553, 14}, /* 12 */
    {-1, 0, 7}, /* 13 */
    {-1, 0, 8}, /* 14 */
};

static const uint16_t HAND_ROOT[HAND_N_TREES] = {
    0, 7, 10,
};

static const int16_t HAND_LEAVES[HAND_N_LEAVES][HAND_N_CLASSES] = {
    {14746, 1638},
    {11469, 4915},
    {6554, 9830},
    {3277, 13107},
    {12288, 4096},
    {4096, 12288},
    {16384, 0},
    {8192, 8192},
    {0, 16384},
};

/* input quantization: code = round((x - OFFSET) * SCALE), saturated to +-32767 */
static const float HAND_FEATURE_OFFSET[HAND_N_FEATURES] = {
    5.000000000e-01f, 5.000000000e-01f,
};

static const float HAND_FEATURE_SCALE[HAND_N_FEATURES] = {
    6.553400000e+04f, 6.553400000e+04f,
};

#endif /* HAND_MODEL_H */
