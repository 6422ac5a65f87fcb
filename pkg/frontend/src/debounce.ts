/**
 * Debounce plus latest-wins dispatch for slider-driven editing.
 *
 * Dragging emits a burst of values; we wait for a quiet gap before firing,
 * and if responses arrive out of order only the most recently dispatched
 * request may update the preview. Stale responses are handed to onStale so
 * callers can count or ignore them.
 */

export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number,
): { call: (...args: A) => void; cancel: () => void } {
  let timer: ReturnType<typeof setTimeout> | undefined;
  return {
    call: (...args: A) => {
      if (timer !== undefined) clearTimeout(timer);
      timer = setTimeout(() => {
        timer = undefined;
        fn(...args);
      }, waitMs);
    },
    cancel: () => {
      if (timer !== undefined) clearTimeout(timer);
      timer = undefined;
    },
  };
}

export class LatestWins<T> {
  private sequence = 0;
  private settled = 0;

  /** True while a dispatched request has not settled yet. */
  get inFlight(): boolean {
    return this.settled < this.sequence;
  }

  async dispatch(
    work: () => Promise<T>,
    apply: (result: T) => void,
    onError?: (error: unknown) => void,
    onStale?: (result: T) => void,
  ): Promise<void> {
    this.sequence += 1;
    const ticket = this.sequence;
    try {
      const result = await work();
      this.settled = Math.max(this.settled, ticket);
      if (ticket === this.sequence) {
        apply(result);
      } else {
        onStale?.(result);
      }
    } catch (error) {
      this.settled = Math.max(this.settled, ticket);
      if (ticket === this.sequence) {
        onError?.(error);
      }
    }
  }

  /** Invalidate everything in flight (e.g. a new source image was loaded). */
  invalidate(): void {
    this.sequence += 1;
    this.settled = this.sequence;
  }
}
