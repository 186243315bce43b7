#include <stdio.h>
#include <omp.h>

int main(void) {
    int n = 10;
    int total = 0;
    int extra_sum = 0;

    #pragma omp parallel for reduction(+:total)
    for (int i = 0; i < n; i++) {
        for (int j = 0; j < n; j++) {
            int value = i * n + j;
            total += value;
            #pragma omp critical
            {
                extra_sum += value;
                printf("Thread %d: i=%d j=%d value=%d\n",
                       omp_get_thread_num(), i, j, value);
            }
        }
    }
    printf("Final total (using reduction): %d\n", total);
    printf("Final extra_sum (using critical): %d\n", extra_sum);
    return 0;
}
